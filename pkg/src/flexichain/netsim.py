"""Deterministic discrete-event harness for the protocol.

A scenario is a JSON document executed on a virtual clock:

    {
      "seed": 42,
      "finality_mode": "exhaustive" | "narrated",
      "kdf": {"cost": 1024, "block_size": 8, "parallelism": 1,
              "salt": "<hex>", "output_length": 128},
      "token_salt": "<hex>",
      "modules": ["tm-1", ...],
      "nodes": [{"name": "bn", "role": "backup", "module": "tm-1"}, ...],
      "script": [{"at": 10, "event": "join", "node": "e1"}, ...]
    }

Script events: `join`, `register_branch`, `transactions`, `build_block`,
`authenticate`, `attack`, `disable`, `genesis`. Every value the simulation
consumes -- extrinsic fixtures, signing keys, nonces, payloads -- is
derived from the scenario seed by counter-mode SHA-256, and all timestamps
come from the script, so a scenario replays to a byte-identical trace.

The authoritative NodeChain is shared state (honest full copies are
byte-identical by construction); per-node lag is modeled by each node's
local VES cursor, which is what the NNS gate checks. Vault copies are
materialized per full node because their byte equality is a protocol
property, and every vault read carries its provenance for the offline
audit.

Adversaries are modeled by an explicit capability lattice. An attack event
holds a subset of {constructed_keys, module_key, vault_access, tuids} and
attempts its category's protocol actions with exactly those secrets; the
outcome records the first check that blocked it (module registry,
signature, NNS gate, match layer, offline gate, or finality quorum).
Knowing TUIDs grants nothing extra: they are already public on chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import consensus, dag, identity, nodechain
from .consensus import (
    AuthenticationMessage,
    FinalityMode,
    ModuleRegistry,
    check_finality,
)
from .errors import (
    ConfigError,
    DomainError,
    OfflineViolation,
    ProtocolError,
    Unauthorized,
)
from .identity import (
    ExtrinsicParameters,
    KdfParameters,
    TokenizedUid,
    TrustedModuleCredential,
    Uid,
    match_layer,
)
from .keys import public_bytes, sign_message, signing_key_from_seed, verify_signature
from .vault import CallOrigin, FULL_NODE_ROLES, NodeRole, Vault, VaultEntry
from .wire import ZERO32, encode_fields, encode_u64, lp, sha256

SECRET_KINDS = frozenset({"constructed_keys", "module_key", "vault_access", "tuids"})
EVENT_KINDS = frozenset(
    {"join", "register_branch", "transactions", "build_block", "authenticate",
     "attack", "disable", "genesis"}
)


# ---------------------------------------------------------------------------
# Seeded fixture derivation
# ---------------------------------------------------------------------------

def _material(seed: int, *labels: object) -> bytes:
    """32 deterministic bytes bound to the seed and a label path."""
    blob = b"flexichain.fixture" + encode_u64(seed)
    for label in labels:
        if isinstance(label, int):
            blob += lp(encode_u64(label))
        elif isinstance(label, bytes):
            blob += lp(label)
        else:
            blob += lp(str(label).encode())
    return sha256(blob)


def make_extrinsic(
    seed: int, name: str, signing_seed: bytes, overrides: dict | None = None
) -> ExtrinsicParameters:
    """Synthetic extrinsic fixture for one node (PUF readout stand-in)."""
    overrides = overrides or {}
    fields = {
        "mac_address": _material(seed, "mac", name)[:6],
        "firmware_digest": _material(seed, "firmware", name),
        "puf_signature": _material(seed, "puf", name),
        "process_power_class": _material(seed, "power", name)[0] % 8,
        "location_tag": _material(seed, "location", name)[:8],
        "ip_address": _material(seed, "ip", name)[:4],
    }
    for key, value in overrides.items():
        if key not in fields:
            raise ConfigError(f"nodes.extrinsic.{key}: unknown field")
        try:
            if key == "process_power_class":
                fields[key] = int(value)
            else:
                fields[key] = bytes.fromhex(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"nodes.extrinsic.{key}: {exc}") from exc
    public = public_bytes(signing_key_from_seed(signing_seed))
    return ExtrinsicParameters(constructed_public_id=public, **fields)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

_ROLES = {
    "backup": NodeRole.BACKUP,
    "edge": NodeRole.EDGE,
    "subscriber": NodeRole.SUBSCRIBER,
    "cps": NodeRole.CPS_IOT,
}


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: NodeRole
    module_id: str
    via: str | None = None
    extrinsic_overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    kdf: KdfParameters
    token_salt: bytes
    finality_mode: FinalityMode
    latest_count: int
    modules: tuple[str, ...]
    nodes: tuple[NodeSpec, ...]
    script: tuple[dict, ...]

    @classmethod
    def from_dict(cls, data: dict, seed_override: int | None = None) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario: top level must be an object")
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed: must be an integer")
        if seed_override is not None:
            seed = seed_override

        kdf_data = data.get("kdf", {})
        if not isinstance(kdf_data, dict):
            raise ConfigError("kdf: must be an object")

        def hex_field(raw, where):
            try:
                return bytes.fromhex(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: invalid hex string") from exc

        salt = (
            hex_field(kdf_data["salt"], "kdf.salt")
            if "salt" in kdf_data
            else _material(seed, "kdf-salt")[:16]
        )
        try:
            kdf = KdfParameters(
                cost=kdf_data.get("cost", 2**14),
                block_size=kdf_data.get("block_size", 8),
                parallelism=kdf_data.get("parallelism", 1),
                salt=salt,
                output_length=kdf_data.get("output_length", identity.UID_LENGTH),
            )
        except (ProtocolError, TypeError) as exc:
            raise ConfigError(f"kdf: {exc}") from exc

        token_salt = (
            hex_field(data["token_salt"], "token_salt")
            if "token_salt" in data
            else _material(seed, "token-salt")[:16]
        )

        mode_name = data.get("finality_mode", "exhaustive")
        if mode_name not in ("exhaustive", "narrated"):
            raise ConfigError(f"finality_mode: unknown mode {mode_name!r}")
        latest_count = data.get("latest_count", 1)
        if not isinstance(latest_count, int) or latest_count < 1:
            raise ConfigError("latest_count: must be a positive integer")

        modules = data.get("modules")
        if not isinstance(modules, list) or not modules:
            raise ConfigError("modules: must be a non-empty list")

        nodes = cls._parse_nodes(data.get("nodes"), modules)
        script = cls._parse_script(data.get("script", []), nodes)
        return cls(
            seed=seed,
            kdf=kdf,
            token_salt=token_salt,
            finality_mode=FinalityMode(mode_name),
            latest_count=latest_count,
            modules=tuple(modules),
            nodes=nodes,
            script=script,
        )

    @staticmethod
    def _parse_nodes(raw, modules: list[str]) -> tuple[NodeSpec, ...]:
        if not isinstance(raw, list) or not raw:
            raise ConfigError("nodes: must be a non-empty list")
        specs = []
        names = set()
        for i, entry in enumerate(raw):
            if not isinstance(entry, dict):
                raise ConfigError(f"nodes[{i}]: must be an object")
            name = entry.get("name")
            if not isinstance(name, str) or not name:
                raise ConfigError(f"nodes[{i}].name: required string")
            if name in names:
                raise ConfigError(f"nodes[{i}].name: duplicate {name!r}")
            names.add(name)
            role_name = entry.get("role")
            if role_name not in _ROLES:
                raise ConfigError(f"nodes[{i}].role: unknown role {role_name!r}")
            # A module outside the registry is allowed here: such a node's
            # enrollment must be rejected at runtime, not at parse time.
            module_id = entry.get("module")
            if not isinstance(module_id, str) or not module_id:
                raise ConfigError(f"nodes[{i}].module: required string")
            specs.append(
                NodeSpec(
                    name=name,
                    role=_ROLES[role_name],
                    module_id=module_id,
                    via=entry.get("via"),
                    extrinsic_overrides=entry.get("extrinsic", {}),
                )
            )
        backups = [s for s in specs if s.role is NodeRole.BACKUP]
        if len(backups) != 1:
            raise ConfigError("nodes: exactly one backup node is required")
        for i, spec in enumerate(specs):
            if spec.via is not None and spec.via not in names:
                raise ConfigError(f"nodes[{i}].via: unknown node {spec.via!r}")
        return tuple(specs)

    @staticmethod
    def _parse_script(raw, nodes: tuple[NodeSpec, ...]) -> tuple[dict, ...]:
        if not isinstance(raw, list):
            raise ConfigError("script: must be a list")
        names = {s.name for s in nodes}
        branches: set[str] = set()
        last_at = 0
        for i, ev in enumerate(raw):
            where = f"script[{i}]"
            if not isinstance(ev, dict):
                raise ConfigError(f"{where}: must be an object")
            at = ev.get("at")
            if not isinstance(at, int) or at < 0:
                raise ConfigError(f"{where}.at: must be a non-negative integer")
            if at < last_at:
                raise ConfigError(f"{where}.at: events must be time-ordered")
            last_at = at
            kind = ev.get("event")
            if kind not in EVENT_KINDS:
                raise ConfigError(f"{where}.event: unknown event {kind!r}")
            if kind in ("join", "disable") and ev.get("node") not in names:
                raise ConfigError(f"{where}.node: unknown node {ev.get('node')!r}")
            if kind == "register_branch":
                branch = ev.get("branch")
                if not isinstance(branch, str) or not branch:
                    raise ConfigError(f"{where}.branch: required string")
                branches.add(branch)
            if kind in ("transactions", "build_block"):
                if ev.get("node") not in names:
                    raise ConfigError(f"{where}.node: unknown node {ev.get('node')!r}")
                if ev.get("branch") not in branches:
                    raise ConfigError(
                        f"{where}.branch: {ev.get('branch')!r} not registered earlier"
                    )
            if kind == "transactions" and not isinstance(ev.get("count", 1), int):
                raise ConfigError(f"{where}.count: must be an integer")
            if kind == "authenticate":
                who = ev.get("nodes", "all")
                if who != "all":
                    if not isinstance(who, list) or not set(who) <= names:
                        raise ConfigError(f"{where}.nodes: must be 'all' or known names")
            if kind == "attack":
                category = ev.get("category")
                if category not in (1, 2, 3, 4):
                    raise ConfigError(f"{where}.category: must be 1..4")
                secrets = ev.get("secrets", [])
                if not isinstance(secrets, list) or not set(secrets) <= SECRET_KINDS:
                    raise ConfigError(
                        f"{where}.secrets: must be a subset of {sorted(SECRET_KINDS)}"
                    )
                targets = ev.get("targets", [])
                if not isinstance(targets, list) or not set(targets) <= names:
                    raise ConfigError(f"{where}.targets: must be known node names")
        return tuple(dict(ev) for ev in raw)

    @classmethod
    def from_file(cls, path: str, seed_override: int | None = None) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"scenario: invalid JSON ({exc})") from exc
        return cls.from_dict(data, seed_override=seed_override)


# ---------------------------------------------------------------------------
# Node actors
# ---------------------------------------------------------------------------

@dataclass
class NodeState:
    """Runtime state of one actor, honest or fabricated."""

    name: str
    role: NodeRole
    module_id: str
    params: ExtrinsicParameters
    signing_key: object  # Ed25519PrivateKey
    via: str | None = None
    online: bool = True
    enrolled: bool = False
    tuid: TokenizedUid | None = None
    hardware_uid: Uid | None = None  # real UID held in the node's secure hardware
    local_ves_index: int = 0
    vault: Vault | None = None
    ledger: nodechain.NodeChainLedger | None = None
    module_registry: ModuleRegistry | None = None

    @property
    def public_id(self) -> bytes:
        return self.params.constructed_public_id


@dataclass(frozen=True)
class AttackEvent:
    category: int
    targets: tuple[str, ...] = ()
    secrets: frozenset[str] = frozenset()
    stale_ledger: bool = False
    attempt_remote_vault: bool | None = None  # default: brute-force tries remotely
    branch: str | None = None

    @classmethod
    def from_dict(cls, ev: dict) -> "AttackEvent":
        return cls(
            category=ev["category"],
            targets=tuple(ev.get("targets", [])),
            secrets=frozenset(ev.get("secrets", [])),
            stale_ledger=bool(ev.get("stale_ledger", False)),
            attempt_remote_vault=ev.get("attempt_remote_vault"),
            branch=ev.get("branch"),
        )

    @property
    def tries_remote_vault(self) -> bool:
        if self.attempt_remote_vault is not None:
            return self.attempt_remote_vault
        return self.category == 4

    def encode(self) -> bytes:
        return encode_fields(
            self.category,
            ",".join(self.targets).encode(),
            ",".join(sorted(self.secrets)).encode(),
            b"\x01" if self.stale_ledger else b"\x00",
            b"\x01" if self.tries_remote_vault else b"\x00",
            (self.branch or "").encode(),
        )


@dataclass(frozen=True)
class AttackOutcome:
    category: int
    succeeded: bool
    blocked_at: str | None
    detail: str = ""

    def encode(self) -> bytes:
        return encode_fields(
            self.category,
            b"\x01" if self.succeeded else b"\x00",
            (self.blocked_at or "").encode(),
            self.detail.encode(),
        )

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "succeeded": self.succeeded,
            "blocked_at": self.blocked_at,
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# The network
# ---------------------------------------------------------------------------

class Network:
    """All shared protocol state plus the per-node actors of one scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.clock = 0
        self.trace: list[str] = []
        self.metrics: dict = {
            "enrollments": 0,
            "rejected_enrollments": 0,
            "transactions": 0,
            "blocks_built": 0,
            "blocks_finalized": 0,
            "authentications": 0,
            "duplicate_authentications": 0,
            "rejections": 0,
            "attacks": [],
        }

        self._module_keys = {
            mid: signing_key_from_seed(_material(config.seed, "module", mid))
            for mid in config.modules
        }
        self.module_registry = ModuleRegistry(
            {mid: public_bytes(key) for mid, key in self._module_keys.items()}
        )

        self.nodes: dict[str, NodeState] = {}
        backup_name = None
        for spec in config.nodes:
            signing_seed = _material(config.seed, "constructed-key", spec.name)
            state = NodeState(
                name=spec.name,
                role=spec.role,
                module_id=spec.module_id,
                params=make_extrinsic(
                    config.seed, spec.name, signing_seed, spec.extrinsic_overrides
                ),
                signing_key=signing_key_from_seed(signing_seed),
                via=spec.via,
                module_registry=self.module_registry,
            )
            self.nodes[spec.name] = state
            if spec.role is NodeRole.BACKUP:
                backup_name = spec.name
        self.backup = self.nodes[backup_name]

        # Genesis: the backup node's virtual existence is block 1.
        self.nodechain, genesis_uid = nodechain.genesis_chain(
            self.backup.params, config.kdf, config.token_salt, timestamp=0
        )
        genesis_block = self.nodechain.blocks[0]
        self.backup.ledger = self.nodechain
        self.backup.vault = Vault(config.token_salt)
        self.backup.vault.append(
            VaultEntry(
                enrollment_index=1,
                real_uid=genesis_uid,
                tuid=genesis_block.tuid,
                extrinsic_digest=genesis_block.extrinsic_digest,
                module_id=self.backup.module_id,
            ),
            NodeRole.BACKUP,
        )
        self.backup.hardware_uid = genesis_uid
        self.backup.tuid = genesis_block.tuid
        self.backup.enrolled = True
        self.backup.local_ves_index = 1
        self.metrics["enrollments"] += 1

        self.registry = dag.BranchRegistry(genesis_block.header_digest)
        self.layer0 = dag.Layer0Ledger(self.registry)
        self._branch_tags: dict[str, str] = {}
        self.tx_pool: list[dag.Transaction] = []
        self.pending_blocks: dict[bytes, dag.DataBlock] = {}
        self.latest_pending: bytes | None = None
        self._fraud_counter = 0
        self._tx_counter = 0

        self.record(0, self.backup.name, "genesis", genesis_block.encode())

    # -- bookkeeping --------------------------------------------------------

    def record(self, at: int, actor: str, event: str, payload: bytes) -> None:
        self.trace.append(f"t={at} actor={actor} event={event} payload={sha256(payload).hex()}")

    def reject(self, at: int, actor: str, action: str, exc: Exception) -> None:
        self.metrics["rejections"] += 1
        payload = f"{action}:{type(exc).__name__}".encode()
        self.record(at, actor, "reject", payload)

    def trace_digest(self) -> bytes:
        return sha256(("\n".join(self.trace) + "\n").encode())

    def roster(self) -> list[TokenizedUid]:
        """On-chain identity roster in enrollment order."""
        return [b.tuid for b in self.nodechain.blocks]

    def node_for_tuid(self, tuid: TokenizedUid) -> NodeState | None:
        for node in self.nodes.values():
            if node.tuid == tuid:
                return node
        return None

    def full_nodes(self) -> list[NodeState]:
        return [n for n in self.nodes.values() if n.vault is not None]

    def responder(self) -> NodeState:
        """The backup node, or the first enrolled online edge node."""
        if self.backup.online:
            return self.backup
        for block in self.nodechain.blocks:
            node = self.node_for_tuid(block.tuid)
            if (
                node is not None
                and node.online
                and node.enrolled
                and node.role is NodeRole.EDGE
            ):
                return node
        raise Unauthorized("no eligible enrollment responder is online")

    def network_ves_index(self) -> int:
        return self.nodechain.ves.index

    # -- event handlers -----------------------------------------------------

    def run_script(self) -> None:
        for ev in self.config.script:
            self.clock = ev["at"]
            kind = ev["event"]
            handler = getattr(self, f"_handle_{kind}")
            handler(ev)

    def _handle_genesis(self, ev: dict) -> None:
        # Forced double initialization; surfaces AlreadyInitialized.
        nodechain.genesis_chain(
            self.backup.params,
            self.config.kdf,
            self.config.token_salt,
            timestamp=self.clock,
            existing=self.nodechain,
        )

    def _handle_join(self, ev: dict) -> None:
        node = self.nodes[ev["node"]]
        try:
            self.enroll(node, at=self.clock)
        except ProtocolError as exc:
            self.metrics["rejected_enrollments"] += 1
            self.reject(self.clock, node.name, "join", exc)

    def enroll(self, node: NodeState, at: int, credential=None) -> None:
        """Full request/response/broadcast flow for one joining node."""
        if not node.online:
            raise Unauthorized("offline node cannot join")
        if credential is None:
            module_key = self._module_keys.get(node.module_id)
            credential = TrustedModuleCredential(
                module_id=node.module_id,
                public_key=public_bytes(module_key) if module_key else b"",
                private_key=module_key,
            )
        nonce = _material(self.config.seed, "nonce", node.name)[:8]
        request = consensus.enroll_request(
            node.params, credential, self.module_registry, nonce
        )
        self.record(at, node.name, "request", request.encode())

        responder = self._route_responder(node)
        response = consensus.enroll_respond(
            responder, request, self.config.kdf, self.config.token_salt, timestamp=at
        )
        self.record(at, responder.name, "response", response.encode())
        self.metrics["enrollments"] += 1
        block = response.virtual_block

        # Vault delta replication to every online full node (secure channel,
        # never part of the broadcast message encoding).
        entry = responder.vault.entries[-1]
        for peer in self.full_nodes():
            if peer is responder or not peer.online:
                continue
            peer.vault.append(entry, peer.role)

        # Ledger broadcast: online nodes advance their VES cursor.
        for peer in self.nodes.values():
            if peer.online and peer.enrolled:
                peer.local_ves_index = self.nodechain.ves.index

        # The joining node receives its ledger view, its hardware identity,
        # and (for full roles) a vault copy.
        node.ledger = self.nodechain
        node.enrolled = True
        node.tuid = block.tuid
        node.local_ves_index = self.nodechain.ves.index
        provisioned = responder.vault.lookup(block.tuid, CallOrigin.LOCAL)
        node.hardware_uid = provisioned.real_uid
        if node.role in FULL_NODE_ROLES and node.vault is None:
            copy = Vault(self.config.token_salt)
            for past in responder.vault.entries:
                copy.append(past, node.role)
            node.vault = copy
        self.record(at, node.name, "sync", encode_fields(node.local_ves_index))

    def _route_responder(self, node: NodeState) -> NodeState:
        if node.role is NodeRole.SUBSCRIBER and node.via:
            via = self.nodes[node.via]
            if via.online and via.enrolled and via.role is NodeRole.EDGE:
                return via
        return self.responder()

    def _handle_register_branch(self, ev: dict) -> None:
        branch_id = ev["branch"]
        genesis_digest = sha256(
            b"flexichain.branch-genesis"
            + lp(branch_id.encode())
            + lp(self.nodechain.ves.head_digest)
        )
        info = self.layer0.register_branch(branch_id, genesis_digest, self.clock)
        self._branch_tags[branch_id] = info.tag
        self.record(self.clock, "network", "branch", encode_fields(
            info.tag.encode(), branch_id.encode(), genesis_digest
        ))

    def _handle_transactions(self, ev: dict) -> None:
        node = self.nodes[ev["node"]]
        tag = self._branch_tags[ev["branch"]]
        if not (node.enrolled and node.online):
            self.reject(self.clock, node.name, "transactions",
                        Unauthorized("node not enrolled or offline"))
            return
        for _ in range(ev.get("count", 1)):
            payload = _material(self.config.seed, "tx", node.name, self._tx_counter)
            self._tx_counter += 1
            message = dag.Transaction.signing_bytes(
                node.public_id, tag, payload, self.clock
            )
            tx = dag.Transaction(
                sender=node.public_id,
                block_type_tag=tag,
                payload=payload,
                timestamp=self.clock,
                signature=sign_message(node.signing_key, message),
            )
            self.tx_pool.append(tx)
            self.metrics["transactions"] += 1
            self.record(self.clock, node.name, "tx", tx.encode())

    def _handle_build_block(self, ev: dict) -> None:
        node = self.nodes[ev["node"]]
        tag = self._branch_tags[ev["branch"]]
        window = tuple(ev.get("window", (0, self.clock)))
        try:
            candidate = dag.build_candidate_block(
                self.tx_pool, node.public_id, tag, window
            )
            prev, rand = self.layer0.select_parents(candidate)
            block = candidate.with_parents(prev, rand)
        except ProtocolError as exc:
            self.reject(self.clock, node.name, "build_block", exc)
            return
        self.pending_blocks[block.header_digest] = block
        self.latest_pending = block.header_digest
        self.metrics["blocks_built"] += 1
        self.record(self.clock, node.name, "block_candidate", block.encode())

    def _resolve_block(self, ref) -> bytes | None:
        if ref in (None, "latest"):
            return self.latest_pending
        try:
            digest = bytes.fromhex(ref)
        except (ValueError, TypeError):
            return None
        return digest if digest in self.pending_blocks else None

    def _handle_authenticate(self, ev: dict) -> None:
        digest = self._resolve_block(ev.get("block"))
        if digest is None:
            self.reject(self.clock, "network", "authenticate",
                        ProtocolError("no pending block"))
            return
        who = ev.get("nodes", "all")
        if who == "all":
            ordered = [
                self.node_for_tuid(t) for t in self.roster()
            ]
            authenticators = [
                n for n in ordered if n is not None and n.enrolled and n.online
            ]
        else:
            authenticators = [self.nodes[name] for name in who]
        for node in authenticators:
            self.authenticate(node, digest, at=self.clock)

    def authenticate(self, node: NodeState, block_digest: bytes, at: int) -> None:
        """One node's signed attestation over a pending block.

        The authenticator gates itself first (enrollment, NNS handshake,
        match layer); receivers then verify the broadcast attestation
        against the node's on-chain constructed key.
        """
        block = self.pending_blocks[block_digest]
        try:
            result = consensus.authenticate_block(
                node, block, self.network_ves_index(), self.config.token_salt
            )
            message = AuthenticationMessage(
                block_digest=block_digest,
                tuid=node.tuid,
                local_ves_index=node.local_ves_index,
                signature=sign_message(
                    node.signing_key,
                    AuthenticationMessage.signing_bytes(
                        block_digest, node.tuid, node.local_ves_index
                    ),
                ),
            )
            self._verify_auth_message(message)
        except ProtocolError as exc:
            self.reject(at, node.name, "authenticate", exc)
            return
        if result.duplicate:
            self.metrics["duplicate_authentications"] += 1
            self.record(at, node.name, "duplicate_auth", message.encode())
            return
        self.pending_blocks[block_digest] = result.block
        self.metrics["authentications"] += 1
        self.record(at, node.name, "auth", message.encode())
        self._check_block_finality(block_digest, at)

    def _verify_auth_message(self, message: AuthenticationMessage) -> None:
        """Receivers check the attestation signature against the on-chain key."""
        for block in self.nodechain.blocks:
            if block.tuid == message.tuid:
                payload = AuthenticationMessage.signing_bytes(
                    message.block_digest, message.tuid, message.local_ves_index
                )
                if not verify_signature(
                    block.constructed_public_key, message.signature, payload
                ):
                    raise Unauthorized("attestation signature does not verify")
                return
        raise Unauthorized("attestation from an identity not on chain")

    def _check_block_finality(self, block_digest: bytes, at: int) -> None:
        block = self.pending_blocks[block_digest]
        final = check_finality(
            block, self.roster(), self.config.finality_mode, self.config.latest_count
        )
        if not final:
            return
        try:
            self.layer0.append_block(block)
        except ProtocolError as exc:
            self.reject(at, "network", "finalize", exc)
            return
        del self.pending_blocks[block_digest]
        if self.latest_pending == block_digest:
            self.latest_pending = None
        self.metrics["blocks_finalized"] += 1
        self.record(at, "network", "finalized", block.encode())

    def _handle_disable(self, ev: dict) -> None:
        node = self.nodes[ev["node"]]
        node.online = False
        self.record(self.clock, node.name, "disable", b"")

    def _handle_attack(self, ev: dict) -> None:
        event = AttackEvent.from_dict(ev)
        self.record(self.clock, "adversary", "attack", event.encode())
        outcome = inject_attack(self, event)
        self.metrics["attacks"].append(outcome.as_dict())
        self.record(self.clock, "adversary", "attack_outcome", outcome.encode())

    # -- summary ------------------------------------------------------------

    def vault_audit(self) -> dict[str, int]:
        totals = {"local_reads": 0, "remote_reads": 0, "remote_rejections": 0}
        for node in self.full_nodes():
            for key, value in node.vault.audit().items():
                totals[key] += value
        return totals

    def summary(self) -> dict:
        roles = {}
        for node in self.nodes.values():
            roles[node.role.value] = roles.get(node.role.value, 0) + 1
        return {
            "nodes_by_role": roles,
            "nodechain_length": len(self.nodechain),
            "vault_size": len(self.backup.vault),
            "enrollments": self.metrics["enrollments"],
            "rejected_enrollments": self.metrics["rejected_enrollments"],
            "transactions": self.metrics["transactions"],
            "blocks_built": self.metrics["blocks_built"],
            "blocks_finalized": self.metrics["blocks_finalized"],
            "authentications": self.metrics["authentications"],
            "duplicate_authentications": self.metrics["duplicate_authentications"],
            "rejections": self.metrics["rejections"],
            "attacks": self.metrics["attacks"],
            "finality_mode": self.config.finality_mode.value,
            "vault_audit": self.vault_audit(),
            "trace_digest": self.trace_digest().hex(),
        }


@dataclass(frozen=True)
class SimulationResult:
    network: Network
    trace: tuple[str, ...]
    metrics: dict
    trace_digest: bytes


def run_scenario(config: ScenarioConfig) -> SimulationResult:
    """Execute a scenario on a fresh network and return its trace."""
    net = Network(config)
    net.run_script()
    return SimulationResult(
        network=net,
        trace=tuple(net.trace),
        metrics=net.metrics,
        trace_digest=net.trace_digest(),
    )


# ---------------------------------------------------------------------------
# Adversary model
# ---------------------------------------------------------------------------

def inject_attack(net: Network, event: AttackEvent) -> AttackOutcome:
    """Attempt one attack category with exactly the event's secrets.

    The adversary walks the protocol in its category's natural order and
    the outcome records the first check that stopped it. Nothing here
    bypasses the protocol surface: enrollment goes through the real
    responder, vault access goes through provenance-tagged lookups, and
    finality is evaluated with the real narration rules.
    """
    at = net.clock

    def blocked(stage: str, detail: str = "") -> AttackOutcome:
        return AttackOutcome(event.category, False, stage, detail)

    # Fabricated-identity enrollment. Mandatory for Sybil; any category
    # holding a registered module key may strengthen itself the same way.
    fake: NodeState | None = None
    if event.category == 1 and "module_key" not in event.secrets:
        return blocked("module registry", "no registered module key")
    if "module_key" in event.secrets:
        fake = _enroll_fabricated_identity(net, at)
        if fake is None:
            return blocked("module registry", "no responder accepted enrollment")

    # Author the fraudulent block.
    if fake is not None:
        author = fake
    elif "constructed_keys" in event.secrets and event.targets:
        author = net.nodes[event.targets[0]]
    else:
        return blocked("signature", "no usable signing identity")
    block = _craft_fraud_block(net, author, event)

    # NNS gate: an adversary replaying against a stale ledger view.
    if event.stale_ledger:
        return blocked("NNS gate", "ledger version cursor lags the network")

    # Authentication: the adversary attests as every identity it can sign
    # for, acquiring each real UID through the only channels that exist.
    attempt_order: list[NodeState] = []
    if "constructed_keys" in event.secrets:
        attempt_order.extend(net.nodes[name] for name in event.targets)
    if fake is not None:
        attempt_order.append(fake)

    responder_vault = net.responder().vault
    for actor in attempt_order:
        if not actor.enrolled or actor.tuid is None:
            continue
        if "vault_access" in event.secrets:
            # Compromised full-node endpoint: reads carry local provenance.
            entry = responder_vault.lookup(actor.tuid, CallOrigin.LOCAL)
            uid = entry.real_uid if entry else None
        elif event.tries_remote_vault:
            try:
                responder_vault.lookup(actor.tuid, CallOrigin.REMOTE)
            except OfflineViolation:
                return blocked("offline gate", "remote vault lookup rejected")
            uid = None
        else:
            uid = None
        if uid is None:
            return blocked("match layer", f"no real UID for {actor.name}")
        if not match_layer(actor.tuid, uid, net.config.token_salt):
            return blocked("match layer", f"token mismatch for {actor.name}")
        block = block.with_narration_entry(actor.tuid)

    final = check_finality(
        block, net.roster(), net.config.finality_mode, net.config.latest_count
    )
    if final:
        net.record(at, "adversary", "fraud_finalized", block.encode())
        return AttackOutcome(event.category, True, None, "fraudulent block finalized")
    return blocked("finality quorum", "insufficient authenticators")


def _enroll_fabricated_identity(net: Network, at: int) -> NodeState | None:
    """Enroll a Sybil identity with a stolen (real) module key."""
    net._fraud_counter += 1
    name = f"sybil-{net._fraud_counter}"
    module_id = net.config.modules[0]
    module_key = net._module_keys[module_id]
    signing_seed = _material(net.config.seed, "sybil-key", net._fraud_counter)
    fake = NodeState(
        name=name,
        role=NodeRole.CPS_IOT,
        module_id=module_id,
        params=make_extrinsic(net.config.seed, name, signing_seed),
        signing_key=signing_key_from_seed(signing_seed),
        module_registry=net.module_registry,
    )
    credential = TrustedModuleCredential(
        module_id=module_id,
        public_key=public_bytes(module_key),
        private_key=module_key,
    )
    try:
        nonce = _material(net.config.seed, "sybil-nonce", net._fraud_counter)[:8]
        request = consensus.enroll_request(
            fake.params, credential, net.module_registry, nonce
        )
        responder = net.responder()
        response = consensus.enroll_respond(
            responder, request, net.config.kdf, net.config.token_salt, timestamp=at
        )
    except ProtocolError:
        return None
    net.record(at, name, "attack_enroll", response.encode())
    net.metrics["enrollments"] += 1
    block = response.virtual_block
    entry = responder.vault.entries[-1]
    for peer in net.full_nodes():
        if peer is not responder and peer.online:
            peer.vault.append(entry, peer.role)
    for peer in net.nodes.values():
        if peer.online and peer.enrolled:
            peer.local_ves_index = net.nodechain.ves.index
    # The fabricated device has no genuine hardware: its real UID exists
    # only inside the vault copies.
    fake.enrolled = True
    fake.tuid = block.tuid
    fake.hardware_uid = None
    fake.local_ves_index = net.nodechain.ves.index
    fake.ledger = net.nodechain
    net.nodes[name] = fake
    return fake


def _craft_fraud_block(net: Network, author: NodeState, event: AttackEvent) -> dag.DataBlock:
    """A block of forged payload signed with whatever key the adversary holds."""
    tag = net._branch_tags.get(event.branch) if event.branch else None
    if tag is None:
        tag = next(iter(net._branch_tags.values()), "B")
    payload = _material(net.config.seed, "fraud", net._fraud_counter, author.name)
    message = dag.Transaction.signing_bytes(author.public_id, tag, payload, net.clock)
    tx = dag.Transaction(
        sender=author.public_id,
        block_type_tag=tag,
        payload=payload,
        timestamp=net.clock,
        signature=sign_message(author.signing_key, message),
    )
    candidate = dag.build_candidate_block(
        [tx], author.public_id, tag, (net.clock, net.clock + 1)
    )
    if tag in net.registry:
        prev, rand = net.layer0.select_parents(candidate)
    else:
        prev, rand = ZERO32, ZERO32
    return candidate.with_parents(prev, rand)


# ---------------------------------------------------------------------------
# Monte-Carlo sampling of the analytic attack model
# ---------------------------------------------------------------------------

def monte_carlo_attack(
    category: int,
    n: int,
    amplitude: float,
    per_node: float,
    trials: int,
    seed: int,
) -> float:
    """Empirical estimate of A * x**n by direct simulation.

    Each trial passes one Bernoulli(A) gate followed by n independent
    Bernoulli(x) per-node stages; the estimate is the success fraction.
    """
    if not 0.0 <= amplitude <= 1.0:
        raise DomainError("amplitude must be a probability")
    if not 0.0 <= per_node <= 1.0:
        raise DomainError("per-node factor must be a probability")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if n < 1:
        raise DomainError("node count must be at least 1")
    rng = np.random.default_rng([seed, category, n])
    gate = rng.random(trials) < amplitude
    stages = rng.random((trials, n)) < per_node
    successes = np.logical_and(gate, stages.all(axis=1))
    return float(successes.sum()) / trials
