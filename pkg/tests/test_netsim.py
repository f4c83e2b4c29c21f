"""Simulator tests: scenario parsing, protocol flows, adversary model."""

import math

import pytest

from flexichain.errors import AlreadyInitialized, ConfigError, DomainError
from flexichain.netsim import (
    ScenarioConfig,
    make_extrinsic,
    monte_carlo_attack,
    run_scenario,
)
from flexichain.nodechain import verify_chain

from conftest import material

CHEAP_KDF_JSON = {"cost": 16, "block_size": 1, "parallelism": 1, "output_length": 128}


def scenario(nodes=None, script=None, mode="exhaustive", seed=7, extra=None):
    data = {
        "seed": seed,
        "finality_mode": mode,
        "kdf": dict(CHEAP_KDF_JSON),
        "modules": ["tm-1", "tm-2"],
        "nodes": nodes
        or [
            {"name": "bn", "role": "backup", "module": "tm-1"},
            {"name": "e1", "role": "edge", "module": "tm-2"},
            {"name": "s1", "role": "subscriber", "module": "tm-2", "via": "e1"},
            {"name": "c1", "role": "cps", "module": "tm-2"},
        ],
        "script": script or [],
    }
    if extra:
        data.update(extra)
    return data


JOIN_ALL = [
    {"at": 10, "event": "join", "node": "e1"},
    {"at": 20, "event": "join", "node": "s1"},
    {"at": 30, "event": "join", "node": "c1"},
]

BLOCK_FLOW = JOIN_ALL + [
    {"at": 40, "event": "register_branch", "branch": "telemetry"},
    {"at": 50, "event": "transactions", "node": "c1", "branch": "telemetry", "count": 3},
    {"at": 60, "event": "build_block", "node": "c1", "branch": "telemetry", "window": [45, 60]},
    {"at": 70, "event": "authenticate", "block": "latest", "nodes": "all"},
]


# ---------------------------------------------------------------------------
# Configuration parsing
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda d: d.update(nodes=[]), "nodes"),
        (lambda d: d.update(modules=[]), "modules"),
        (lambda d: d.update(seed="zero"), "seed"),
        (lambda d: d.update(finality_mode="immediate"), "finality_mode"),
        (lambda d: d["nodes"].append({"name": "bn2", "role": "backup", "module": "tm-1"}),
         "backup"),
        (lambda d: d["nodes"].append({"name": "bn", "role": "cps", "module": "tm-1"}),
         "duplicate"),
        (lambda d: d["nodes"].append({"name": "x", "role": "router", "module": "tm-1"}),
         "role"),
        (lambda d: d["nodes"].append({"name": "x", "role": "cps", "module": "tm-1",
                                      "via": "nope"}), "via"),
        (lambda d: d.update(script=[{"at": 1, "event": "teleport"}]), "event"),
        (lambda d: d.update(script=[{"at": -5, "event": "join", "node": "e1"}]), "at"),
        (lambda d: d.update(script=[{"at": 9, "event": "join", "node": "ghost"}]), "node"),
        (lambda d: d.update(script=[
            {"at": 5, "event": "transactions", "node": "c1", "branch": "nope"}
        ]), "branch"),
        (lambda d: d.update(script=[
            {"at": 9, "event": "join", "node": "e1"},
            {"at": 5, "event": "join", "node": "c1"},
        ]), "time-ordered"),
        (lambda d: d.update(script=[
            {"at": 5, "event": "attack", "category": 9}
        ]), "category"),
        (lambda d: d.update(script=[
            {"at": 5, "event": "attack", "category": 1, "secrets": ["warp"]}
        ]), "secrets"),
    ],
)
def test_config_errors_name_the_offending_key(mutate, needle):
    data = scenario(script=list(JOIN_ALL))
    mutate(data)
    with pytest.raises(ConfigError) as excinfo:
        ScenarioConfig.from_dict(data)
    assert needle in str(excinfo.value)


def test_seed_override_wins():
    config = ScenarioConfig.from_dict(scenario(seed=5), seed_override=99)
    assert config.seed == 99


def test_fixture_derivation_is_seed_deterministic():
    seed_a = make_extrinsic(1, "n", material("k1", 32))
    seed_a2 = make_extrinsic(1, "n", material("k1", 32))
    seed_b = make_extrinsic(2, "n", material("k1", 32))
    assert seed_a == seed_a2
    assert seed_a.mac_address != seed_b.mac_address


def test_extrinsic_overrides_apply():
    fixture = make_extrinsic(
        1, "n", material("k1", 32),
        overrides={"mac_address": "0a0b0c0d0e0f", "process_power_class": 3},
    )
    assert fixture.mac_address == bytes.fromhex("0a0b0c0d0e0f")
    assert fixture.process_power_class == 3
    with pytest.raises(ConfigError):
        make_extrinsic(1, "n", material("k1", 32), overrides={"mac_address": "zz"})
    with pytest.raises(ConfigError):
        make_extrinsic(1, "n", material("k1", 32), overrides={"serial": "00"})


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def test_genesis_only_scenario():
    result = run_scenario(ScenarioConfig.from_dict(scenario()))
    net = result.network
    assert len(net.nodechain) == 1
    assert len(net.backup.vault) == 1
    assert net.metrics["blocks_built"] == 0
    assert net.metrics["enrollments"] == 1


def test_four_node_join_script():
    config = ScenarioConfig.from_dict(scenario(script=list(JOIN_ALL)))
    first = run_scenario(config)
    second = run_scenario(config)
    assert first.trace_digest == second.trace_digest
    assert first.metrics["enrollments"] == 4
    net = first.network
    assert len(net.nodechain) == 4
    assert len(net.backup.vault) == 4
    assert verify_chain(
        net.nodechain, kdf=config.kdf, vault=net.backup.vault,
        token_salt=config.token_salt,
    ) is None


def test_unregistered_module_join_rejected():
    nodes = [
        {"name": "bn", "role": "backup", "module": "tm-1"},
        {"name": "rogue", "role": "cps", "module": "tm-x"},
    ]
    config = ScenarioConfig.from_dict(
        scenario(nodes=nodes, script=[{"at": 10, "event": "join", "node": "rogue"}])
    )
    result = run_scenario(config)
    assert result.metrics["rejected_enrollments"] == 1
    assert len(result.network.nodechain) == 1
    assert any("reject" in line for line in result.trace)


def test_three_runs_identical_trace_digest():
    config = ScenarioConfig.from_dict(scenario(script=list(BLOCK_FLOW)))
    digests = {run_scenario(config).trace_digest for _ in range(3)}
    assert len(digests) == 1


def test_block_flow_finalizes_exhaustively():
    result = run_scenario(ScenarioConfig.from_dict(scenario(script=list(BLOCK_FLOW))))
    assert result.metrics["blocks_built"] == 1
    assert result.metrics["blocks_finalized"] == 1
    assert result.metrics["authentications"] == 4
    blocks = result.network.layer0.blocks("B")
    assert len(blocks) == 1
    assert len(blocks[0].narration) == 4


def test_vault_replication_byte_identical():
    nodes = [
        {"name": "bn", "role": "backup", "module": "tm-1"},
        {"name": "e1", "role": "edge", "module": "tm-2"},
        {"name": "e2", "role": "edge", "module": "tm-2"},
        {"name": "c1", "role": "cps", "module": "tm-2"},
    ]
    script = [
        {"at": 10, "event": "join", "node": "e1"},
        {"at": 20, "event": "join", "node": "e2"},
        {"at": 30, "event": "join", "node": "c1"},
    ]
    net = run_scenario(ScenarioConfig.from_dict(scenario(nodes=nodes, script=script))).network
    blobs = {node.name: node.vault.serialize() for node in net.full_nodes()}
    assert len(blobs) == 3
    assert len(set(blobs.values())) == 1


def test_subscriber_routes_through_assigned_edge():
    script = [
        {"at": 10, "event": "join", "node": "e1"},
        {"at": 20, "event": "join", "node": "s1"},
    ]
    result = run_scenario(ScenarioConfig.from_dict(scenario(script=script)))
    # The response to s1 comes from its assigned edge node, not the backup.
    responses = [line for line in result.trace if "event=response" in line]
    assert "actor=e1" in responses[-1]


def test_spf_edge_takes_over_after_backup_disabled():
    nodes = [
        {"name": "bn", "role": "backup", "module": "tm-1"},
        {"name": "e1", "role": "edge", "module": "tm-2"},
        {"name": "c1", "role": "cps", "module": "tm-2"},
    ]
    script = [
        {"at": 10, "event": "join", "node": "e1"},
        {"at": 20, "event": "disable", "node": "bn"},
        {"at": 30, "event": "join", "node": "c1"},
        {"at": 40, "event": "register_branch", "branch": "telemetry"},
        {"at": 50, "event": "transactions", "node": "c1", "branch": "telemetry"},
        {"at": 60, "event": "build_block", "node": "c1", "branch": "telemetry"},
        {"at": 70, "event": "authenticate", "block": "latest", "nodes": "all"},
    ]
    result = run_scenario(
        ScenarioConfig.from_dict(scenario(nodes=nodes, script=script, mode="narrated"))
    )
    net = result.network
    assert result.metrics["enrollments"] == 3
    assert result.metrics["blocks_finalized"] == 1
    responses = [line for line in result.trace if "event=response" in line]
    assert "actor=e1" in responses[-1]
    assert len(net.nodechain) == 3


def test_offline_node_fails_nns_gate():
    nodes = [
        {"name": "bn", "role": "backup", "module": "tm-1"},
        {"name": "e1", "role": "edge", "module": "tm-2"},
        {"name": "c1", "role": "cps", "module": "tm-2"},
    ]
    script = [
        {"at": 10, "event": "join", "node": "e1"},
        {"at": 15, "event": "register_branch", "branch": "telemetry"},
        {"at": 20, "event": "transactions", "node": "bn", "branch": "telemetry"},
        {"at": 25, "event": "disable", "node": "e1"},
        {"at": 30, "event": "join", "node": "c1"},  # e1 misses this broadcast
        {"at": 40, "event": "build_block", "node": "bn", "branch": "telemetry",
         "window": [0, 40]},
        {"at": 50, "event": "authenticate", "block": "latest", "nodes": ["e1"]},
    ]
    result = run_scenario(ScenarioConfig.from_dict(scenario(nodes=nodes, script=script)))
    rejects = [line for line in result.trace if "event=reject" in line]
    assert any("actor=e1" in line for line in rejects)
    assert result.network.nodes["e1"].local_ves_index == 2  # missed index 3


def test_genesis_event_raises_already_initialized():
    config = ScenarioConfig.from_dict(
        scenario(script=[{"at": 5, "event": "genesis"}])
    )
    with pytest.raises(AlreadyInitialized):
        run_scenario(config)


def test_summary_audit_reports_zero_remote_reads():
    result = run_scenario(ScenarioConfig.from_dict(scenario(script=list(BLOCK_FLOW))))
    audit = result.network.vault_audit()
    assert audit["remote_reads"] == 0
    assert audit["local_reads"] > 0


# ---------------------------------------------------------------------------
# Adversary model
# ---------------------------------------------------------------------------

ATTACK_NODES = [
    {"name": "bn", "role": "backup", "module": "tm-1"},
    {"name": "e1", "role": "edge", "module": "tm-2"},
    {"name": "v", "role": "cps", "module": "tm-2"},
    {"name": "w", "role": "cps", "module": "tm-2"},
]

ATTACK_JOINS = [
    {"at": 10, "event": "join", "node": "e1"},
    {"at": 20, "event": "join", "node": "v"},
    {"at": 30, "event": "join", "node": "w"},
    {"at": 40, "event": "register_branch", "branch": "telemetry"},
]


def run_attack(attack: dict, mode: str = "narrated"):
    script = ATTACK_JOINS + [dict(attack, at=50, event="attack")]
    result = run_scenario(
        ScenarioConfig.from_dict(scenario(nodes=ATTACK_NODES, script=script, mode=mode))
    )
    outcomes = result.metrics["attacks"]
    assert len(outcomes) == 1
    return outcomes[0], result.network


def test_sybil_without_module_key_blocked_at_registry():
    outcome, _ = run_attack({"category": 1, "secrets": []})
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "module registry"


def test_sybil_with_module_key_blocked_at_match_layer():
    outcome, net = run_attack({"category": 1, "secrets": ["module_key"]})
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "match layer"
    # The fabricated identity did enroll: module compromise is visible on chain.
    assert len(net.nodechain) == 5


def test_sybil_with_module_key_and_vault_finalizes_narrated():
    outcome, _ = run_attack(
        {"category": 1, "secrets": ["module_key", "vault_access"]}, mode="narrated"
    )
    assert outcome["succeeded"]
    assert outcome["blocked_at"] is None


def test_phishing_with_constructed_key_blocked_at_match_layer():
    outcome, _ = run_attack(
        {"category": 2, "targets": ["v"], "secrets": ["constructed_keys", "tuids"]}
    )
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "match layer"


@pytest.mark.parametrize("mode", ["exhaustive", "narrated"])
def test_phishing_with_vault_access_blocked_at_quorum(mode):
    outcome, _ = run_attack(
        {"category": 2, "targets": ["v"], "secrets": ["constructed_keys", "vault_access"]},
        mode=mode,
    )
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "finality quorum"


@pytest.mark.parametrize("mode", ["exhaustive", "narrated"])
def test_majority_with_all_secrets_succeeds(mode):
    outcome, _ = run_attack(
        {
            "category": 3,
            "targets": ["bn", "e1", "v", "w"],
            "secrets": ["constructed_keys", "vault_access", "tuids"],
        },
        mode=mode,
    )
    assert outcome["succeeded"]


def test_majority_partial_coalition_blocked_at_quorum():
    outcome, _ = run_attack(
        {
            "category": 3,
            "targets": ["e1", "v"],
            "secrets": ["constructed_keys", "vault_access"],
        },
        mode="exhaustive",
    )
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "finality quorum"


def test_brute_force_blocked_at_offline_gate():
    outcome, net = run_attack(
        {"category": 4, "targets": ["v"], "secrets": ["constructed_keys"]}
    )
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "offline gate"
    audit = net.vault_audit()
    assert audit["remote_rejections"] >= 1
    assert audit["remote_reads"] == 0


def test_stale_adversary_blocked_at_nns_gate():
    outcome, _ = run_attack(
        {
            "category": 2,
            "targets": ["v"],
            "secrets": ["constructed_keys"],
            "stale_ledger": True,
        }
    )
    assert not outcome["succeeded"]
    assert outcome["blocked_at"] == "NNS gate"


# ---------------------------------------------------------------------------
# Monte-Carlo sampling
# ---------------------------------------------------------------------------

def test_monte_carlo_unit_per_node_factor():
    trials = 100_000
    estimate = monte_carlo_attack(1, 10, 0.25, 1.0, trials, seed=11)
    assert abs(estimate - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / trials)


def test_monte_carlo_zero_per_node_factor():
    assert monte_carlo_attack(1, 3, 0.25, 0.0, 5000, seed=1) == 0.0


def test_monte_carlo_matches_analytic_band():
    trials = 1_000_000
    analytic = 0.25 * 0.9215**4
    estimate = monte_carlo_attack(1, 4, 0.25, 0.9215, trials, seed=3)
    sigma = math.sqrt(analytic * (1 - analytic) / trials)
    assert abs(estimate - analytic) <= 3 * sigma
    assert estimate == pytest.approx(0.1803, abs=2e-3)


def test_monte_carlo_deterministic_per_seed():
    a = monte_carlo_attack(2, 6, 0.25, 0.9, 10_000, seed=5)
    b = monte_carlo_attack(2, 6, 0.25, 0.9, 10_000, seed=5)
    c = monte_carlo_attack(2, 6, 0.25, 0.9, 10_000, seed=6)
    assert a == b
    assert a != c


@pytest.mark.parametrize(
    "kwargs",
    [
        {"amplitude": 1.5},
        {"amplitude": -0.1},
        {"per_node": 1.01},
        {"trials": 0},
        {"n": 0},
    ],
)
def test_monte_carlo_domain_errors(kwargs):
    args = {"category": 1, "n": 4, "amplitude": 0.25, "per_node": 0.9,
            "trials": 100, "seed": 0}
    args.update(kwargs)
    with pytest.raises(DomainError):
        monte_carlo_attack(**args)


def test_monte_carlo_band_coverage_is_at_least_99_percent():
    trials = 2000
    analytic = 0.25 * 0.9215**4
    sigma = math.sqrt(analytic * (1 - analytic) / trials)
    in_band = 0
    experiments = 300
    for seed in range(experiments):
        estimate = monte_carlo_attack(1, 4, 0.25, 0.9215, trials, seed=seed)
        if abs(estimate - analytic) <= 3 * sigma:
            in_band += 1
    assert in_band / experiments >= 0.99
