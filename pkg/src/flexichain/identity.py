"""Node identity derivation: extrinsic parameters, UIDs, and tokens.

A node's real unique identity (UID) is derived from its extrinsic
parameters -- the manufacturing values it presents at enrollment -- through
a two-stage generator: SHA-256 binds the extrinsic digest to the UID of the
previously enrolled node, and scrypt stretches the result into the
128-byte UID. Only a one-way 32-byte token of the UID (the TUID) ever
appears on chain; the match layer checks a claimed UID against its token
without revealing anything about other UIDs.

The scrypt parameters and the tokenization salt are network-secret
configuration. They are never embedded in blocks or message payloads.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from .errors import InvalidKdf, InvalidParameters
from .keys import is_valid_public_key
from .wire import encode_fields, lp, sha256

UID_LENGTH = 128
TUID_LENGTH = 32
MAC_LENGTH = 6
FIRMWARE_DIGEST_LENGTH = 32


@dataclass(frozen=True)
class ExtrinsicParameters:
    """Manufacturing and constructed identity values presented at enrollment.

    The first six fields are the manufacturing identity; they are hashed
    into container 1. The constructed public ID travels separately as
    container 2 and doubles as the node's transaction-signing key.
    """

    mac_address: bytes
    firmware_digest: bytes
    puf_signature: bytes
    process_power_class: int
    location_tag: bytes
    ip_address: bytes
    constructed_public_id: bytes

    def __post_init__(self):
        if len(self.mac_address) != MAC_LENGTH:
            raise InvalidParameters("mac_address must be 6 bytes")
        if len(self.firmware_digest) != FIRMWARE_DIGEST_LENGTH:
            raise InvalidParameters("firmware_digest must be 32 bytes")
        if not self.puf_signature:
            raise InvalidParameters("puf_signature must be non-empty")
        if not 0 <= self.process_power_class < 2**32:
            raise InvalidParameters("process_power_class out of range")
        if not self.location_tag:
            raise InvalidParameters("location_tag must be non-empty")
        if len(self.ip_address) not in (4, 16):
            raise InvalidParameters("ip_address must be 4 or 16 bytes")
        if not is_valid_public_key(self.constructed_public_id):
            raise InvalidParameters("constructed_public_id is not a valid public key")

    def manufacturing_bytes(self) -> bytes:
        """Canonical serialization of the manufacturing fields only."""
        return encode_fields(
            self.mac_address,
            self.firmware_digest,
            self.puf_signature,
            self.process_power_class,
            self.location_tag,
            self.ip_address,
        )

    def canonical_bytes(self) -> bytes:
        return self.manufacturing_bytes() + lp(self.constructed_public_id)


@dataclass(frozen=True)
class Uid:
    """Real node identity: the scrypt-derived key. Kept off chain."""

    value: bytes

    def __post_init__(self):
        if not self.value:
            raise InvalidParameters("uid must be non-empty")


@dataclass(frozen=True)
class TokenizedUid:
    """One-way 32-byte token of a UID; the only identity form stored on chain."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != TUID_LENGTH:
            raise InvalidParameters("tuid must be 32 bytes")


@dataclass(frozen=True)
class KdfParameters:
    """scrypt work parameters plus network salt. Secret network configuration."""

    cost: int
    block_size: int
    parallelism: int
    salt: bytes
    output_length: int = UID_LENGTH

    def __post_init__(self):
        if self.cost <= 1 or self.cost & (self.cost - 1) != 0:
            raise InvalidKdf("cost must be a power of two greater than 1")
        if self.block_size < 1:
            raise InvalidKdf("block_size must be positive")
        if self.parallelism < 1:
            raise InvalidKdf("parallelism must be positive")
        if self.output_length < 1:
            raise InvalidKdf("output_length must be positive")


@dataclass(frozen=True)
class TrustedModuleCredential:
    """Trusted hardware module identity; private key present on the holder side."""

    module_id: str
    public_key: bytes
    private_key: object | None = None  # Ed25519PrivateKey on the holder side


def zero_uid(length: int = UID_LENGTH) -> Uid:
    """The all-zero previous UID anchoring the genesis derivation."""
    return Uid(b"\x00" * length)


def scrypt_kdf(
    password: bytes,
    salt: bytes,
    cost: int,
    block_size: int,
    parallelism: int,
    length: int,
) -> bytes:
    """The raw scrypt submodule (RFC 7914 semantics)."""
    # 128 * N * r bytes of V plus working buffers; leave generous headroom
    # so the 2^20 reference vector fits.
    maxmem = 128 * cost * block_size * parallelism + (32 << 20)
    return hashlib.scrypt(
        password,
        salt=salt,
        n=cost,
        r=block_size,
        p=parallelism,
        dklen=length,
        maxmem=maxmem,
    )


def hash_extrinsic(params: ExtrinsicParameters) -> tuple[bytes, bytes]:
    """Split parameters into the two request containers.

    Container 1 is the SHA-256 digest of the canonical manufacturing
    serialization; container 2 is the constructed public ID verbatim.
    """
    if not isinstance(params, ExtrinsicParameters):
        raise InvalidParameters("expected ExtrinsicParameters")
    return sha256(params.manufacturing_bytes()), params.constructed_public_id


def derive_uid(container1: bytes, prev_uid: Uid, kdf: KdfParameters) -> Uid:
    """Generate a UID: SHA-256(container1 || previous UID) fed into scrypt."""
    if len(container1) != 32:
        raise InvalidParameters("container1 must be a 32-byte digest")
    if not isinstance(kdf, KdfParameters):
        raise InvalidKdf("expected KdfParameters")
    password = sha256(container1 + prev_uid.value)
    derived = scrypt_kdf(
        password,
        kdf.salt,
        kdf.cost,
        kdf.block_size,
        kdf.parallelism,
        kdf.output_length,
    )
    return Uid(derived)


def tokenize_uid(uid: Uid, token_salt: bytes) -> TokenizedUid:
    """One-way token: SHA-256(uid || salt)."""
    return TokenizedUid(sha256(uid.value + token_salt))


def match_layer(tuid: TokenizedUid, uid: Uid, token_salt: bytes) -> bool:
    """Check that a claimed UID tokenizes to the on-chain TUID.

    Comparison is constant-shape via hmac.compare_digest.
    """
    expected = tokenize_uid(uid, token_salt)
    return hmac.compare_digest(expected.value, tuid.value)
