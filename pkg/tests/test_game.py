import numpy as np
import pytest

from dockgame import engine, game
from dockgame.data import SynthSpec, generate
from dockgame.engine import LoopConfig, TraceEntry, TrainTrace
from dockgame.losses import LossReport, make_report


def test_potential_identity_single_probe(players, weights, net_cfg, graph_cfg,
                                         record):
    for player in ("L", "P"):
        probe = game.verify_exact_potential(record, players, weights, net_cfg,
                                            graph_cfg, player, seed=0)
        assert probe.passed, probe
        assert probe.residual <= 1e-9 * (1.0 + abs(probe.delta_f))


def test_potential_probe_rejects_bad_player(players, weights, net_cfg,
                                            graph_cfg, record):
    with pytest.raises(ValueError):
        game.verify_exact_potential(record, players, weights, net_cfg,
                                    graph_cfg, "both", seed=0)


def test_broken_shared_term_is_detected(players, weights, net_cfg, graph_cfg,
                                        record):
    # doubling the shared term only inside the candidate potential breaks
    # the identity, which the probe must flag
    probe = game.verify_exact_potential(record, players, weights, net_cfg,
                                        graph_cfg, "L", seed=0,
                                        gamma_scale=2.0)
    assert not probe.passed


def test_probe_perturbs_exactly_one_player(players, weights, net_cfg,
                                           graph_cfg, record):
    before = {name: store.state_dict() for name, store in players.items()}
    game.verify_exact_potential(record, players, weights, net_cfg, graph_cfg,
                                "P", seed=3)
    for name, store in players.items():
        for pname, arr in store.state_dict().items():
            assert np.array_equal(arr, before[name][pname])


def test_probe_csv_roundtrip(tmp_path, players, weights, net_cfg, graph_cfg,
                             record):
    probes = game.run_potential_probes(record, players, weights, net_cfg,
                                       graph_cfg, n_probes=2)
    assert len(probes) == 4
    path = tmp_path / "probes.csv"
    game.write_probe_csv(path, probes)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("probe_seed,player")
    assert len(lines) == 5


def test_potential_value_identities(weights, rng):
    report = make_report(*rng.random(5), weights)
    f = game.potential_value(report, weights)
    assert abs(f - report.potential) < 1e-12
    assert abs(f - (report.j_ligand + weights.beta * report.pocket_coord)) < 1e-12


def _trace(j_pairs):
    """Build a trace from (acting, j_ligand, j_protein) tuples."""
    trace = TrainTrace()
    for i, (acting, j_l, j_p) in enumerate(j_pairs, start=1):
        report = LossReport(j_ligand=j_l, j_protein=j_p)
        trace.append(TraceEntry(step=i, epoch=0, acting=acting, report=report,
                                wall_time=0.0))
    return trace


def test_afip_extraction_improvements_and_plateau():
    trace = _trace([
        ("L", 10.0, 5.0),
        ("P", 10.0, 5.0),
        ("L", 9.0, 5.0),          # J_L down 1 since the last L step
        ("L", 8.5, 5.0),          # J_L down 0.5
        ("P", 8.5, 4.0),          # J_P down 1 since the last P step
        ("P", 8.5, 4.0 + 5e-5),   # within epsilon: plateau
        ("L", 8.5 + 2e-5, 4.0),   # within epsilon
    ])
    result = game.extract_afip(trace, epsilon=1e-4)
    assert result.improvement_steps == [3, 4, 5]
    assert result.longest_run == 3
    assert result.plateau_start == 6
    assert result.plateau_is_stationary


def test_afip_empty_when_no_improvement():
    trace = _trace([("L", 1.0, 1.0), ("L", 1.0, 1.0)])
    result = game.extract_afip(trace, epsilon=1e-4)
    assert result.improvement_steps == []
    assert result.longest_run == 0


def test_afip_uses_acting_players_payoff():
    # J_P drops but the acting player is L, whose payoff is flat
    trace = _trace([("L", 1.0, 10.0), ("L", 1.0, 1.0)])
    result = game.extract_afip(trace, epsilon=1e-4)
    assert result.improvement_steps == []


def test_afip_compares_within_same_acting_phase():
    # the two phases report payoffs on different loop structures; a jump
    # between an L entry and a P entry must not count as improvement
    trace = _trace([
        ("L", 10.0, 99.0),
        ("P", 0.0, 5.0),
        ("L", 10.0, 99.0),
        ("P", 0.0, 5.0),
    ])
    result = game.extract_afip(trace, epsilon=1e-4)
    assert result.improvement_steps == []


def test_nash_gap_zero_steps(players, weights, net_cfg, graph_cfg, record):
    gap_l, gap_p = game.nash_gap([record], players, weights, net_cfg,
                                 graph_cfg, steps=0)
    assert gap_l == 0.0
    assert gap_p == 0.0


def test_nash_gap_positive_for_fresh_models(players, weights, net_cfg,
                                            graph_cfg, record):
    gap_l, gap_p = game.nash_gap([record], players, weights, net_cfg,
                                 graph_cfg, steps=5, lr=1e-4)
    assert gap_l > 0.0
    assert gap_p > 0.0


def test_nash_gap_leaves_players_unchanged(players, weights, net_cfg,
                                           graph_cfg, record):
    before = {name: store.state_dict() for name, store in players.items()}
    game.nash_gap([record], players, weights, net_cfg, graph_cfg, steps=2,
                  lr=1e-4)
    for name, store in players.items():
        for pname, arr in store.state_dict().items():
            assert np.array_equal(arr, before[name][pname])


def test_joint_evaluate_unilateral_decoupling(players, weights, net_cfg,
                                              graph_cfg, record):
    # on the frozen context, perturbing the protein player must leave the
    # ligand player's individual terms untouched (and vice versa)
    ctx = game.build_context(record, players, net_cfg, graph_cfg)
    base, _ = game.joint_evaluate(ctx, players, weights, net_cfg)
    rng = np.random.default_rng(0)
    deviated = dict(players)
    deviated["protein"] = players["protein"].perturbed(rng, 1e-2)
    dev, _ = game.joint_evaluate(ctx, deviated, weights, net_cfg)
    assert dev.pocket_cls == base.pocket_cls
    assert dev.pocket_center == base.pocket_center
    assert dev.ligand_coord == base.ligand_coord
    assert dev.pocket_coord != base.pocket_coord
