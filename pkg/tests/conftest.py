"""Shared fixtures: cheap KDF parameters and deterministic node fixtures."""

import hashlib

import pytest

from flexichain.identity import ExtrinsicParameters, KdfParameters
from flexichain.keys import public_bytes, signing_key_from_seed

# Interactive-grade scrypt cost is deliberate protocol configuration; unit
# tests use the lightest valid parameters so derivations stay microseconds.
CHEAP_KDF = KdfParameters(
    cost=16, block_size=1, parallelism=1, salt=b"unit-test-salt!!", output_length=128
)

TOKEN_SALT = b"unit-token-salt!"


@pytest.fixture
def kdf() -> KdfParameters:
    return CHEAP_KDF


@pytest.fixture
def token_salt() -> bytes:
    return TOKEN_SALT


def material(label: str, n: int = 32) -> bytes:
    out = b""
    counter = 0
    while len(out) < n:
        out += hashlib.sha256(f"fixture:{label}:{counter}".encode()).digest()
        counter += 1
    return out[:n]


def make_params(label: str) -> ExtrinsicParameters:
    """Deterministic synthetic extrinsic parameters for one test identity."""
    return ExtrinsicParameters(
        mac_address=material(label + "/mac", 6),
        firmware_digest=material(label + "/fw", 32),
        puf_signature=material(label + "/puf", 32),
        process_power_class=material(label + "/ppc", 1)[0] % 8,
        location_tag=material(label + "/loc", 8),
        ip_address=material(label + "/ip", 4),
        constructed_public_id=public_bytes(signing_key_from_seed(material(label + "/key", 32))),
    )


def make_signing_key(label: str):
    return signing_key_from_seed(material(label + "/key", 32))


@pytest.fixture
def params_factory():
    return make_params
