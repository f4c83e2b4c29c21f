"""Layer-0 DAG tests: Merkle commitment, arcs, ordering, branches."""

import dataclasses
import hashlib
import random

import pytest

from flexichain.dag import (
    BranchRegistry,
    DataBlock,
    Layer0Ledger,
    Transaction,
    build_candidate_block,
    merkle_root,
    narration_fold,
)
from flexichain.errors import (
    BadSignature,
    DuplicateBranch,
    IntegrityViolation,
    NoTransactions,
    UnknownBranch,
)
from flexichain.identity import TokenizedUid
from flexichain.keys import public_bytes, sign_message

from conftest import make_signing_key, material

VIRTUAL_GENESIS = material("dag/virtual-genesis", 32)


def signed_tx(label: str, tag: str = "B", timestamp: int = 100) -> Transaction:
    key = make_signing_key(label)
    sender = public_bytes(key)
    payload = material(f"dag/payload/{label}", 24)
    message = Transaction.signing_bytes(sender, tag, payload, timestamp)
    return Transaction(
        sender=sender,
        block_type_tag=tag,
        payload=payload,
        timestamp=timestamp,
        signature=sign_message(key, message),
    )


def ledger_with_branch() -> tuple[Layer0Ledger, str]:
    registry = BranchRegistry(VIRTUAL_GENESIS)
    ledger = Layer0Ledger(registry)
    info = ledger.register_branch("telemetry", material("dag/branch-b", 32), timestamp=1)
    return ledger, info.tag


def sealed_block(ledger: Layer0Ledger, label: str, tag: str, at: int) -> DataBlock:
    tx = signed_tx(label, tag, timestamp=at - 1)
    candidate = build_candidate_block([tx], tx.sender, tag, (at - 2, at))
    prev, rand = ledger.select_parents(candidate)
    return candidate.with_parents(prev, rand)


# ---------------------------------------------------------------------------
# Merkle commitment
# ---------------------------------------------------------------------------

def reference_merkle(leaves):
    """Independent recursive oracle with the same duplicate-last rule."""
    if len(leaves) == 1:
        return leaves[0]
    if len(leaves) % 2 == 1:
        leaves = leaves + [leaves[-1]]
    parents = [
        hashlib.sha256(leaves[i] + leaves[i + 1]).digest()
        for i in range(0, len(leaves), 2)
    ]
    return reference_merkle(parents)


@pytest.mark.parametrize("count", [1, 2, 3, 4, 5, 7, 8, 13])
def test_merkle_root_matches_recursive_oracle(count):
    leaves = [material(f"dag/leaf/{i}", 32) for i in range(count)]
    assert merkle_root(leaves) == reference_merkle(leaves)


def test_merkle_mutation_changes_root():
    rng = random.Random(0x3E1F)
    for _ in range(40):
        count = rng.randrange(1, 10)
        leaves = [rng.randbytes(32) for _ in range(count)]
        root = merkle_root(leaves)
        victim = rng.randrange(count)
        mutated = bytearray(leaves[victim])
        mutated[rng.randrange(32)] ^= 1 << rng.randrange(8)
        leaves[victim] = bytes(mutated)
        assert merkle_root(leaves) != root


# ---------------------------------------------------------------------------
# Transactions and candidate blocks
# ---------------------------------------------------------------------------

def test_transaction_signature_round_trip():
    tx = signed_tx("alice")
    assert tx.verify()
    tampered = dataclasses.replace(tx, payload=b"forged")
    assert not tampered.verify()


def test_candidate_block_commits_matching_transactions():
    txs = [signed_tx("alice", timestamp=t) for t in (100, 101, 102)]
    sender = txs[0].sender
    block = build_candidate_block(txs, sender, "B", (100, 103))
    assert len(block.transactions) == 3
    ordered = sorted(txs, key=lambda t: (t.timestamp, t.digest()))
    assert block.tx_root == reference_merkle([tx.digest() for tx in ordered])
    assert block.narration == ()
    assert not block.sealed


def test_candidate_block_filters_other_senders():
    mine = [signed_tx("alice", timestamp=100)]
    other = [signed_tx("bob", timestamp=100)]
    block = build_candidate_block(mine + other, mine[0].sender, "B", (99, 101))
    assert block.transactions == tuple(mine)


def test_candidate_block_window_is_half_open():
    txs = [signed_tx("alice", timestamp=t) for t in (99, 100, 104, 105)]
    sender = txs[0].sender
    block = build_candidate_block(txs, sender, "B", (100, 105))
    assert [tx.timestamp for tx in block.transactions] == [100, 104]


def test_candidate_block_empty_set_rejected():
    with pytest.raises(NoTransactions):
        build_candidate_block([], b"\x00" * 32, "B", (0, 10))
    tx = signed_tx("alice", timestamp=500)
    with pytest.raises(NoTransactions):
        build_candidate_block([tx], tx.sender, "B", (0, 10))


def test_candidate_block_rejects_bad_signature():
    tx = dataclasses.replace(signed_tx("alice"), signature=b"\x00" * 64)
    with pytest.raises(BadSignature):
        build_candidate_block([tx], tx.sender, "B", (99, 101))


def test_transaction_ordering_is_canonical():
    txs = [signed_tx(f"alice/{i}", timestamp=100) for i in range(4)]
    # All share a timestamp but not a sender; use one sender's clones instead.
    key = make_signing_key("alice")
    sender = public_bytes(key)
    txs = []
    for i in range(4):
        payload = material(f"dag/tie/{i}", 8)
        message = Transaction.signing_bytes(sender, "B", payload, 100)
        txs.append(Transaction(sender, "B", payload, 100, sign_message(key, message)))
    block = build_candidate_block(list(reversed(txs)), sender, "B", (100, 101))
    digests = [tx.digest() for tx in block.transactions]
    assert digests == sorted(digests)


# ---------------------------------------------------------------------------
# Branch registry
# ---------------------------------------------------------------------------

def test_reserved_virtual_branch_and_sequential_tags():
    registry = BranchRegistry(VIRTUAL_GENESIS)
    assert "A" in registry
    first = registry.register("telemetry", material("dag/b", 32))
    assert first.tag == "B"
    second = registry.register("firmware", material("dag/c", 32))
    assert second.tag == "C"


def test_duplicate_branch_rejected():
    registry = BranchRegistry(VIRTUAL_GENESIS)
    registry.register("telemetry", material("dag/b", 32))
    with pytest.raises(DuplicateBranch):
        registry.register("telemetry", material("dag/c", 32))


def test_registry_size_counts_reserved_tag():
    registry = BranchRegistry(VIRTUAL_GENESIS)
    for i in range(5):
        registry.register(f"branch-{i}", material(f"dag/g{i}", 32))
    assert len(registry) == 6


def test_unknown_branch_lookup():
    registry = BranchRegistry(VIRTUAL_GENESIS)
    with pytest.raises(UnknownBranch):
        registry.branch("Z")


# ---------------------------------------------------------------------------
# Parent selection
# ---------------------------------------------------------------------------

def test_first_block_arcs_point_at_branch_genesis():
    ledger, tag = ledger_with_branch()
    candidate = build_candidate_block(
        [signed_tx("alice", tag, 10)], signed_tx("alice", tag, 10).sender, tag, (9, 11)
    )
    prev, rand = ledger.select_parents(candidate)
    genesis = ledger.registry.branch(tag).genesis_digest
    assert prev == rand == genesis


def test_select_parents_deterministic():
    ledger, tag = ledger_with_branch()
    candidate = sealed_block(ledger, "alice", tag, 10)
    assert ledger.select_parents(candidate) == ledger.select_parents(candidate)


def test_select_parents_unregistered_tag():
    ledger, _ = ledger_with_branch()
    candidate = build_candidate_block(
        [signed_tx("alice", "Z", 10)], signed_tx("alice", "Z", 10).sender, "Z", (9, 11)
    )
    with pytest.raises(UnknownBranch):
        ledger.select_parents(candidate)


def test_random_arc_uses_tx_root_modular_index():
    ledger, tag = ledger_with_branch()
    for i in range(4):
        ledger.append_block(sealed_block(ledger, f"n{i}", tag, 10 + 2 * i))
    ancestors = ledger.same_type_ancestors(tag)
    assert len(ancestors) == 5
    candidate = build_candidate_block(
        [signed_tx("probe", tag, 100)], signed_tx("probe", tag, 100).sender, tag,
        (99, 101),
    )
    expected_index = int.from_bytes(candidate.tx_root, "big") % 5
    prev, rand = ledger.select_parents(candidate)
    assert prev == ancestors[-1]
    assert rand == ancestors[expected_index]


# ---------------------------------------------------------------------------
# Appending and ordering
# ---------------------------------------------------------------------------

def test_append_block_validations():
    ledger, tag = ledger_with_branch()
    block = sealed_block(ledger, "alice", tag, 10)
    unsealed = dataclasses.replace(block, header_digest=b"\x00" * 32)
    with pytest.raises(IntegrityViolation):
        ledger.append_block(unsealed)
    wrong_root = dataclasses.replace(block, tx_root=b"\x11" * 32)
    with pytest.raises(IntegrityViolation):
        ledger.append_block(wrong_root)
    ledger.append_block(block)
    with pytest.raises(IntegrityViolation):
        ledger.append_block(block)  # duplicate digest


def test_append_block_rejects_equal_timestamp_arc():
    ledger, tag = ledger_with_branch()
    tx = signed_tx("alice", tag, 0)
    candidate = build_candidate_block([tx], tx.sender, tag, (0, 1))
    block = candidate.with_parents(*ledger.select_parents(candidate))
    # Branch genesis sits at t=1; the block timestamp is also 1.
    with pytest.raises(IntegrityViolation):
        ledger.append_block(block)


def test_topological_order_single_genesis():
    registry = BranchRegistry(VIRTUAL_GENESIS)
    ledger = Layer0Ledger(registry)
    assert ledger.topological_order() == [VIRTUAL_GENESIS]


def test_topological_order_sorts_by_time_then_digest():
    ledger, tag = ledger_with_branch()
    b1 = sealed_block(ledger, "alice", tag, 10)
    ledger.append_block(b1)
    b2 = sealed_block(ledger, "bob", tag, 20)
    ledger.append_block(b2)
    order = ledger.topological_order()
    assert order.index(b1.header_digest) < order.index(b2.header_digest)

    # Equal timestamps in independent branches break ties by digest.
    other = ledger.register_branch("firmware", material("dag/firm", 32), timestamp=1)
    c1 = sealed_block(ledger, "carol", other.tag, 20)
    ledger.append_block(c1)
    order = ledger.topological_order()
    first, second = sorted([b2.header_digest, c1.header_digest])
    assert order.index(first) < order.index(second)


def test_every_block_follows_its_arc_targets():
    rng = random.Random(0xDA6)
    ledger, tag = ledger_with_branch()
    for i in range(12):
        ledger.append_block(sealed_block(ledger, f"n{rng.randrange(1000)}", tag, 10 + 3 * i))
    order = ledger.topological_order()
    position = {digest: i for i, digest in enumerate(order)}
    for block in ledger.blocks(tag):
        assert position[block.header_digest] > position[block.prev_same_type]
        assert position[block.header_digest] > position[block.random_arc]


# ---------------------------------------------------------------------------
# Narration and serialization
# ---------------------------------------------------------------------------

def test_narration_fold_matches_nested_hash():
    t1, t2, t3 = (TokenizedUid(material(f"dag/t{i}", 32)) for i in range(3))
    zero = b"\x00" * 32
    expected = hashlib.sha256(
        hashlib.sha256(hashlib.sha256(zero + t1.value).digest() + t2.value).digest()
        + t3.value
    ).digest()
    assert narration_fold((t1, t2, t3)) == expected

    ledger, tag = ledger_with_branch()
    block = sealed_block(ledger, "alice", tag, 10)
    for tuid in (t1, t2, t3):
        block = block.with_narration_entry(tuid)
    assert block.narration[-1][1] == expected


def test_datablock_encode_decode_round_trip():
    ledger, tag = ledger_with_branch()
    block = sealed_block(ledger, "alice", tag, 10)
    block = block.with_narration_entry(TokenizedUid(material("dag/auth", 32)))
    decoded = DataBlock.decode(block.encode())
    assert decoded == block


def test_export_text_lists_all_records():
    ledger, tag = ledger_with_branch()
    block = sealed_block(ledger, "alice", tag, 10)
    ledger.append_block(block)
    text = ledger.export_text()
    lines = text.strip().splitlines()
    assert len(lines) == 3  # virtual genesis, branch genesis, one data block
    assert any(line.endswith("genesis - - 0 0") for line in lines)
    assert block.header_digest.hex() in text
