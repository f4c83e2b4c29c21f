"""NodeChain: the linked ledger of virtual existence blocks.

Each enrolled node is mirrored on chain by one virtual existence block
holding its tokenized UID, constructed public key, and extrinsic digest.
Blocks are linked by header digests, and the Virtual Existence State (VES)
-- a monotone counter plus the head digest -- is the version every node
must match before it may authenticate. Because the extrinsic digest is
committed inside the header, any hardware change on a node shows up as a
header mismatch that every ledger holder can observe.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import (
    AlreadyInitialized,
    EmptyChain,
    IntegrityViolation,
    StaleState,
    UnknownNode,
)
from .identity import (
    ExtrinsicParameters,
    KdfParameters,
    TokenizedUid,
    Uid,
    derive_uid,
    hash_extrinsic,
    tokenize_uid,
    zero_uid,
)
from .wire import Reader, ZERO32, encode_fields, lp, sha256


@dataclass(frozen=True)
class VirtualExistenceBlock:
    """On-chain mirror of one enrolled node."""

    tuid: TokenizedUid
    constructed_public_key: bytes
    prev_link: bytes
    nns_index: int
    timestamp: int
    extrinsic_digest: bytes
    header_digest: bytes

    @staticmethod
    def header_bytes(
        tuid: TokenizedUid,
        constructed_public_key: bytes,
        prev_link: bytes,
        nns_index: int,
        timestamp: int,
        extrinsic_digest: bytes,
    ) -> bytes:
        return encode_fields(
            tuid.value,
            constructed_public_key,
            prev_link,
            nns_index,
            timestamp,
            extrinsic_digest,
        )

    @classmethod
    def create(
        cls,
        tuid: TokenizedUid,
        constructed_public_key: bytes,
        prev_link: bytes,
        nns_index: int,
        timestamp: int,
        extrinsic_digest: bytes,
    ) -> "VirtualExistenceBlock":
        digest = sha256(
            cls.header_bytes(
                tuid, constructed_public_key, prev_link, nns_index, timestamp,
                extrinsic_digest,
            )
        )
        return cls(
            tuid=tuid,
            constructed_public_key=constructed_public_key,
            prev_link=prev_link,
            nns_index=nns_index,
            timestamp=timestamp,
            extrinsic_digest=extrinsic_digest,
            header_digest=digest,
        )

    def recomputed_header(self) -> bytes:
        return sha256(
            self.header_bytes(
                self.tuid,
                self.constructed_public_key,
                self.prev_link,
                self.nns_index,
                self.timestamp,
                self.extrinsic_digest,
            )
        )

    def encode(self) -> bytes:
        return encode_fields(
            self.tuid.value,
            self.constructed_public_key,
            self.prev_link,
            self.nns_index,
            self.timestamp,
            self.extrinsic_digest,
            self.header_digest,
        )

    @classmethod
    def decode(cls, data: bytes) -> "VirtualExistenceBlock":
        r = Reader(data)
        block = cls(
            tuid=TokenizedUid(r.read_field()),
            constructed_public_key=r.read_field(),
            prev_link=r.read_field(),
            nns_index=r.read_u64(),
            timestamp=r.read_u64(),
            extrinsic_digest=r.read_field(),
            header_digest=r.read_field(),
        )
        if not r.exhausted():
            raise ValueError("trailing bytes after block")
        return block


@dataclass(frozen=True)
class VesState:
    """Virtual Existence State: ledger version counter and head digest."""

    index: int
    head_digest: bytes


class ViolationKind(enum.Enum):
    LINK_BREAK = "LinkBreak"
    HEADER_MISMATCH = "HeaderMismatch"
    TOKEN_MISMATCH = "TokenMismatch"
    INDEX_GAP = "IndexGap"


@dataclass(frozen=True)
class Violation:
    """First failing position found by verify_chain."""

    index: int
    kind: ViolationKind


@dataclass(frozen=True)
class HeaderAlert:
    """Reported extrinsic parameters no longer match the stored digest."""

    index: int
    new_digest: bytes


class NodeChainLedger:
    """Append-only chain of virtual existence blocks.

    Appends are serialized through a single writer; the block tuple handed
    out to readers is immutable.
    """

    def __init__(self):
        self._blocks: list[VirtualExistenceBlock] = []

    def __len__(self) -> int:
        return len(self._blocks)

    @property
    def blocks(self) -> tuple[VirtualExistenceBlock, ...]:
        return tuple(self._blocks)

    @property
    def ves(self) -> VesState:
        if not self._blocks:
            return VesState(index=0, head_digest=ZERO32)
        return VesState(index=len(self._blocks), head_digest=self._blocks[-1].header_digest)

    def block_at(self, nns_index: int) -> VirtualExistenceBlock:
        if not 1 <= nns_index <= len(self._blocks):
            raise UnknownNode(f"no block at index {nns_index}")
        return self._blocks[nns_index - 1]

    def serialize(self) -> bytes:
        return b"".join(lp(b.encode()) for b in self._blocks)

    @classmethod
    def deserialize(cls, data: bytes) -> "NodeChainLedger":
        ledger = cls()
        r = Reader(data)
        while not r.exhausted():
            ledger._blocks.append(VirtualExistenceBlock.decode(r.read_field()))
        return ledger


def genesis_chain(
    bn_params: ExtrinsicParameters,
    kdf: KdfParameters,
    token_salt: bytes,
    timestamp: int = 0,
    existing: NodeChainLedger | None = None,
) -> tuple[NodeChainLedger, Uid]:
    """Create the chain with the backup node's virtual block as block 1.

    The genesis UID is derived against the all-zero previous UID. Passing
    the network's current ledger as `existing` guards against double
    initialization.
    """
    if existing is not None:
        raise AlreadyInitialized("network already has a genesis chain")
    container1, container2 = hash_extrinsic(bn_params)
    uid = derive_uid(container1, zero_uid(kdf.output_length), kdf)
    block = VirtualExistenceBlock.create(
        tuid=tokenize_uid(uid, token_salt),
        constructed_public_key=container2,
        prev_link=ZERO32,
        nns_index=1,
        timestamp=timestamp,
        extrinsic_digest=container1,
    )
    ledger = NodeChainLedger()
    ledger._blocks.append(block)
    return ledger, uid


def append_virtual_block(
    ledger: NodeChainLedger, block: VirtualExistenceBlock
) -> VesState:
    """Append the next virtual block after checking index, link, and header."""
    ves = ledger.ves
    if block.nns_index != ves.index + 1:
        raise StaleState(
            f"expected nns_index {ves.index + 1}, got {block.nns_index}"
        )
    if block.prev_link != ves.head_digest:
        raise IntegrityViolation("prev_link does not match chain head")
    if block.recomputed_header() != block.header_digest:
        raise IntegrityViolation("header digest does not verify")
    ledger._blocks.append(block)
    return ledger.ves


def verify_chain(
    ledger: NodeChainLedger,
    kdf: KdfParameters | None = None,
    vault=None,
    token_salt: bytes | None = None,
) -> Violation | None:
    """Walk the chain; return None if intact, else the first violation.

    Link-only mode checks indices, links, and header digests. When a vault
    handle (plus salt) is supplied, every block's TUID must tokenize from
    the vault's real UID; with `kdf` as well, the whole UID derivation
    chain is recomputed entry by entry.
    """
    if len(ledger) == 0:
        raise EmptyChain("cannot verify an empty chain")
    full_mode = vault is not None and token_salt is not None
    prev_digest = ZERO32
    prev_uid = zero_uid(kdf.output_length) if kdf is not None else None
    for i, block in enumerate(ledger.blocks, start=1):
        if block.nns_index != i:
            return Violation(i, ViolationKind.INDEX_GAP)
        if block.prev_link != prev_digest:
            return Violation(i, ViolationKind.LINK_BREAK)
        if block.recomputed_header() != block.header_digest:
            return Violation(i, ViolationKind.HEADER_MISMATCH)
        if full_mode:
            entry = vault.entry_at(i)
            if entry is None:
                return Violation(i, ViolationKind.TOKEN_MISMATCH)
            if tokenize_uid(entry.real_uid, token_salt) != block.tuid:
                return Violation(i, ViolationKind.TOKEN_MISMATCH)
            if entry.extrinsic_digest != block.extrinsic_digest:
                return Violation(i, ViolationKind.TOKEN_MISMATCH)
            if kdf is not None:
                expected = derive_uid(block.extrinsic_digest, prev_uid, kdf)
                if expected != entry.real_uid:
                    return Violation(i, ViolationKind.TOKEN_MISMATCH)
                prev_uid = entry.real_uid
        prev_digest = block.header_digest
    return None


def detect_header_change(
    ledger: NodeChainLedger,
    enrollment_index: int,
    reported: ExtrinsicParameters,
) -> HeaderAlert | None:
    """Compare freshly reported parameters against the stored digest.

    Returns None when nothing changed, otherwise an alert carrying the new
    digest so observers can see exactly what the node now claims to be.
    """
    block = ledger.block_at(enrollment_index)
    new_digest, _ = hash_extrinsic(reported)
    if new_digest == block.extrinsic_digest:
        return None
    return HeaderAlert(index=enrollment_index, new_digest=new_digest)
