"""Layer-0 DAG ledger: typed data blocks over registered layer-1 branches.

The layer-0 ledger aggregates independent branches, one per block type
tag. Tag "A" is reserved for the virtual-existence branch mirrored from
the NodeChain; data branches are allocated sequential tags starting at
"B". Every data block carries two arcs into its own branch: a chain arc to
the most recent same-type block, and a pseudorandom arc to an earlier
same-type block chosen by the block's own transaction root. Ordering is
time consensus: ascending timestamp with header-digest tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import (
    BadSignature,
    DuplicateBranch,
    IntegrityViolation,
    NoTransactions,
    UnknownBranch,
)
from .identity import TokenizedUid
from .keys import verify_signature
from .wire import Reader, ZERO32, encode_fields, lp, sha256

VIRTUAL_BRANCH_TAG = "A"


# ---------------------------------------------------------------------------
# Transactions and Merkle commitment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transaction:
    """A signed payload from one sender into one branch."""

    sender: bytes
    block_type_tag: str
    payload: bytes
    timestamp: int
    signature: bytes

    @staticmethod
    def signing_bytes(sender: bytes, tag: str, payload: bytes, timestamp: int) -> bytes:
        return encode_fields(sender, tag.encode(), payload, timestamp)

    def encode(self) -> bytes:
        return encode_fields(
            self.sender,
            self.block_type_tag.encode(),
            self.payload,
            self.timestamp,
            self.signature,
        )

    def digest(self) -> bytes:
        return sha256(self.encode())

    def verify(self) -> bool:
        message = self.signing_bytes(
            self.sender, self.block_type_tag, self.payload, self.timestamp
        )
        return verify_signature(self.sender, self.signature, message)


def merkle_root(leaves: list[bytes]) -> bytes:
    """Pairwise SHA-256 tree; an odd node is paired with itself.

    A single leaf is its own root. Empty input is rejected by callers
    before reaching here.
    """
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [
            sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)
        ]
    return level[0]


# ---------------------------------------------------------------------------
# Data blocks and the chain of narration
# ---------------------------------------------------------------------------

NARRATION_SEED = ZERO32


def narration_fold(tuids: tuple[TokenizedUid, ...]) -> bytes:
    """Hash-chain the authenticator tokens: d_i = SHA-256(d_{i-1} || tuid_i)."""
    digest = NARRATION_SEED
    for tuid in tuids:
        digest = sha256(digest + tuid.value)
    return digest


@dataclass(frozen=True)
class DataBlock:
    """One data-exchange block of a layer-1 branch.

    The header digest commits the tag, transaction root, both arcs, and
    the timestamp. Narration accumulates after creation as authenticators
    attest, so it is deliberately outside the header.
    """

    block_type_tag: str
    transactions: tuple[Transaction, ...]
    tx_root: bytes
    prev_same_type: bytes
    random_arc: bytes
    narration: tuple[tuple[TokenizedUid, bytes], ...]
    timestamp: int
    header_digest: bytes

    @staticmethod
    def header_bytes(
        tag: str, tx_root: bytes, prev_same_type: bytes, random_arc: bytes,
        timestamp: int,
    ) -> bytes:
        return encode_fields(tag.encode(), tx_root, prev_same_type, random_arc, timestamp)

    @property
    def sealed(self) -> bool:
        return self.header_digest != ZERO32

    def with_parents(self, prev_same_type: bytes, random_arc: bytes) -> "DataBlock":
        """Attach arcs and seal the header."""
        digest = sha256(
            self.header_bytes(
                self.block_type_tag, self.tx_root, prev_same_type, random_arc,
                self.timestamp,
            )
        )
        return replace(
            self,
            prev_same_type=prev_same_type,
            random_arc=random_arc,
            header_digest=digest,
        )

    def narration_tuids(self) -> tuple[TokenizedUid, ...]:
        return tuple(tuid for tuid, _ in self.narration)

    def with_narration_entry(self, tuid: TokenizedUid) -> "DataBlock":
        prev = self.narration[-1][1] if self.narration else NARRATION_SEED
        entry = (tuid, sha256(prev + tuid.value))
        return replace(self, narration=self.narration + (entry,))

    def encode(self) -> bytes:
        head = self.header_bytes(
            self.block_type_tag, self.tx_root, self.prev_same_type,
            self.random_arc, self.timestamp,
        )
        txs = encode_fields(len(self.transactions)) + b"".join(
            lp(t.encode()) for t in self.transactions
        )
        narration = encode_fields(len(self.narration)) + b"".join(
            lp(tuid.value) + lp(digest) for tuid, digest in self.narration
        )
        return head + lp(self.header_digest) + txs + narration

    @classmethod
    def decode(cls, data: bytes) -> "DataBlock":
        r = Reader(data)
        tag = r.read_field().decode()
        tx_root = r.read_field()
        prev_same_type = r.read_field()
        random_arc = r.read_field()
        timestamp = r.read_u64()
        header_digest = r.read_field()
        txs = []
        for _ in range(r.read_u64()):
            tr = Reader(r.read_field())
            txs.append(
                Transaction(
                    sender=tr.read_field(),
                    block_type_tag=tr.read_field().decode(),
                    payload=tr.read_field(),
                    timestamp=tr.read_u64(),
                    signature=tr.read_field(),
                )
            )
        narration = []
        for _ in range(r.read_u64()):
            narration.append((TokenizedUid(r.read_field()), r.read_field()))
        return cls(
            block_type_tag=tag,
            transactions=tuple(txs),
            tx_root=tx_root,
            prev_same_type=prev_same_type,
            random_arc=random_arc,
            narration=tuple(narration),
            timestamp=timestamp,
            header_digest=header_digest,
        )


def build_candidate_block(
    pool: list[Transaction],
    sender: bytes,
    tag: str,
    window: tuple[int, int],
) -> DataBlock:
    """Collect one sender's transactions of one type inside a time window.

    The window is half-open: t_start <= timestamp < t_end. Transactions
    are ordered canonically by (timestamp, digest) and committed under a
    Merkle root. Arcs and narration are attached later; the candidate is
    unsealed. The block timestamp is the window close.
    """
    t_start, t_end = window
    matching = [
        tx
        for tx in pool
        if tx.sender == sender
        and tx.block_type_tag == tag
        and t_start <= tx.timestamp < t_end
    ]
    if not matching:
        raise NoTransactions(
            f"no transactions for sender/tag {tag!r} in [{t_start}, {t_end})"
        )
    for tx in matching:
        if not tx.verify():
            raise BadSignature("pool transaction signature does not verify")
    matching.sort(key=lambda tx: (tx.timestamp, tx.digest()))
    root = merkle_root([tx.digest() for tx in matching])
    return DataBlock(
        block_type_tag=tag,
        transactions=tuple(matching),
        tx_root=root,
        prev_same_type=ZERO32,
        random_arc=ZERO32,
        narration=(),
        timestamp=t_end,
        header_digest=ZERO32,
    )


# ---------------------------------------------------------------------------
# Branch registry and the layer-0 ledger state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchInfo:
    tag: str
    branch_id: str
    genesis_digest: bytes


def _tag_for(index: int) -> str:
    """Sequential tag names: A, B, ..., Z, AA, AB, ..."""
    name = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        name = chr(ord("A") + rem) + name
    return name


class BranchRegistry:
    """Tag allocation for layer-1 branches; tag A is reserved at creation."""

    def __init__(self, virtual_genesis_digest: bytes):
        self._branches: dict[str, BranchInfo] = {
            VIRTUAL_BRANCH_TAG: BranchInfo(
                VIRTUAL_BRANCH_TAG, "virtual-existence", virtual_genesis_digest
            )
        }

    def __len__(self) -> int:
        return len(self._branches)

    def __contains__(self, tag: str) -> bool:
        return tag in self._branches

    def branch(self, tag: str) -> BranchInfo:
        if tag not in self._branches:
            raise UnknownBranch(f"no branch registered for tag {tag!r}")
        return self._branches[tag]

    def register(self, branch_id: str, genesis_digest: bytes) -> BranchInfo:
        if any(b.branch_id == branch_id for b in self._branches.values()):
            raise DuplicateBranch(f"branch id {branch_id!r} already registered")
        info = BranchInfo(_tag_for(len(self._branches)), branch_id, genesis_digest)
        self._branches[info.tag] = info
        return info


@dataclass(frozen=True)
class LedgerRecord:
    """One node of the layer-0 DAG: a branch genesis marker or a data block."""

    digest: bytes
    tag: str
    timestamp: int
    block: DataBlock | None  # None for genesis markers

    @property
    def is_genesis(self) -> bool:
        return self.block is None


class Layer0Ledger:
    """Immutable-snapshot DAG of finalized blocks across all branches."""

    def __init__(self, registry: BranchRegistry):
        self.registry = registry
        self._records: dict[bytes, LedgerRecord] = {}
        self._by_tag: dict[str, list[bytes]] = {}
        for tag in (VIRTUAL_BRANCH_TAG,):
            self._add_genesis(registry.branch(tag), timestamp=0)

    def _add_genesis(self, info: BranchInfo, timestamp: int) -> None:
        record = LedgerRecord(info.genesis_digest, info.tag, timestamp, None)
        self._records[record.digest] = record
        self._by_tag[info.tag] = [record.digest]

    def register_branch(
        self, branch_id: str, genesis_digest: bytes, timestamp: int
    ) -> BranchInfo:
        info = self.registry.register(branch_id, genesis_digest)
        self._add_genesis(info, timestamp)
        return info

    def same_type_ancestors(self, tag: str) -> list[bytes]:
        if tag not in self.registry:
            raise UnknownBranch(f"no branch registered for tag {tag!r}")
        return list(self._by_tag[tag])

    def record(self, digest: bytes) -> LedgerRecord | None:
        return self._records.get(digest)

    def blocks(self, tag: str | None = None) -> list[DataBlock]:
        digests = (
            self._by_tag.get(tag, []) if tag is not None else list(self._records)
        )
        return [
            self._records[d].block
            for d in digests
            if self._records[d].block is not None
        ]

    def select_parents(self, candidate: DataBlock) -> tuple[bytes, bytes]:
        """Deterministic arc choice for a candidate block.

        The chain arc is the newest same-type record; the random arc is the
        ancestor indexed by the candidate's tx_root reduced modulo the
        ancestor count.
        """
        ancestors = self.same_type_ancestors(candidate.block_type_tag)
        prev_same_type = ancestors[-1]
        pick = int.from_bytes(candidate.tx_root, "big") % len(ancestors)
        return prev_same_type, ancestors[pick]

    def append_block(self, block: DataBlock) -> None:
        """Store a sealed block after arc and commitment checks."""
        if not block.sealed:
            raise IntegrityViolation("block is unsealed")
        if block.block_type_tag not in self.registry:
            raise UnknownBranch(
                f"no branch registered for tag {block.block_type_tag!r}"
            )
        recomputed = sha256(
            DataBlock.header_bytes(
                block.block_type_tag, block.tx_root, block.prev_same_type,
                block.random_arc, block.timestamp,
            )
        )
        if recomputed != block.header_digest:
            raise IntegrityViolation("header digest does not verify")
        if merkle_root([tx.digest() for tx in block.transactions]) != block.tx_root:
            raise IntegrityViolation("tx_root does not match transactions")
        for arc in (block.prev_same_type, block.random_arc):
            target = self._records.get(arc)
            if target is None or target.tag != block.block_type_tag:
                raise IntegrityViolation("arc does not reference a same-type record")
            if target.timestamp >= block.timestamp:
                raise IntegrityViolation("arc must reference a strictly earlier record")
        if block.header_digest in self._records:
            raise IntegrityViolation("block already present")
        record = LedgerRecord(block.header_digest, block.block_type_tag,
                              block.timestamp, block)
        self._records[record.digest] = record
        self._by_tag[block.block_type_tag].append(record.digest)

    def topological_order(self) -> list[bytes]:
        """All record digests ascending by (timestamp, digest)."""
        return [
            r.digest
            for r in sorted(self._records.values(), key=lambda r: (r.timestamp, r.digest))
        ]

    def export_text(self) -> str:
        """One line per record for trace inspection.

        Format: `digest tag kind prev random timestamp narration`, with
        `-` standing in for the absent arcs of a genesis marker.
        """
        lines = []
        for digest in self.topological_order():
            rec = self._records[digest]
            if rec.is_genesis:
                lines.append(
                    f"{rec.digest.hex()} {rec.tag} genesis - - {rec.timestamp} 0"
                )
            else:
                b = rec.block
                lines.append(
                    f"{rec.digest.hex()} {rec.tag} data {b.prev_same_type.hex()} "
                    f"{b.random_arc.hex()} {rec.timestamp} {len(b.narration)}"
                )
        return "\n".join(lines) + "\n"
