"""Potential-game machinery: the exact potential, unilateral-deviation
probes, improvement-path extraction, and a best-response Nash-gap probe.

The potential of a joint strategy adds the protein player's weighted
coordinate loss to the ligand payoff; because the distance-map term is
shared, a unilateral parameter change moves the potential by exactly the
deviating player's payoff change.

Unilateral deviations are realised at the evaluation level: the pocket
selection, ligand placement and both players' input poses are frozen in a
shared context, so each player's prediction depends only on its own
parameters and the deviation is unilateral in the game-theoretic sense.
"""

import contextlib
import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import losses, nets
from .engine import true_pocket_center
from .graph import (build_complex_graph, extract_pocket_subgraph,
                    place_ligand_at_center, protein_center)


def potential_value(report, weights, gamma_scale=1.0):
    """Exact potential from loss components.

    ``gamma_scale`` exists for negative testing: scaling the shared term
    breaks the potential identity.
    """
    return (report.pocket_pred
            + weights.alpha2 * report.ligand_coord
            + weights.beta * report.pocket_coord
            + weights.gamma * gamma_scale * report.dis_map)


@dataclass
class EvalContext:
    """Frozen shared context for unilateral-deviation evaluation."""

    graph: object          # full graph, ligand at protein center
    sub: object            # pocket subgraph, ligand at frozen pocket center
    atoms0: np.ndarray     # frozen ligand input coordinates
    res0: np.ndarray       # frozen residue input coordinates
    true_atoms: np.ndarray
    true_res: np.ndarray
    true_center: np.ndarray
    labels: np.ndarray


def build_context(record, players, net_cfg, graph_cfg):
    """Evaluate pocket selection once and freeze everything downstream."""
    graph = build_complex_graph(record, graph_cfg)
    graph = place_ligand_at_center(graph, protein_center(graph))
    with ad.no_grad():
        sel, _, _ = nets.pocket_predict(graph, players["pocket"], net_cfg)
    placed = place_ligand_at_center(graph, sel.center)
    sub = extract_pocket_subgraph(placed, sel)
    return EvalContext(
        graph=graph,
        sub=sub,
        atoms0=sub.ligand_coords.copy(),
        res0=sub.residue_coords.copy(),
        true_atoms=record.holo_ligand,
        true_res=record.holo_residues[sub.residue_index],
        true_center=true_pocket_center(record),
        labels=record.pocket_labels,
    )


def joint_evaluate(ctx, players, weights, net_cfg, grad_players=()):
    """Evaluate both payoffs on the frozen context.

    Each player's prediction is computed from the shared frozen inputs, so
    it depends only on that player's parameters. Returns the loss report
    plus the payoff tensors (for gradient-based probes).
    """
    def scoped(name):
        if name in grad_players:
            return contextlib.nullcontext()
        return ad.no_grad()

    with scoped("L"):
        _, probs_t, center_t = nets.pocket_predict(
            ctx.graph, players["pocket"], net_cfg)
        pred_atoms = nets.ligand_dock_forward(
            ctx.sub, players["ligand"], net_cfg, ctx.atoms0, ctx.res0)
    with scoped("P"):
        pred_res = nets.pocket_dock_forward(
            ctx.sub, players["protein"], net_cfg, ctx.atoms0, ctx.res0)

    cls_t = losses.pocket_cls_loss([probs_t], [ctx.labels])
    cen_t = losses.pocket_center_loss([center_t], [ctx.true_center])
    lig_t = losses.ligand_coord_loss([pred_atoms], [ctx.true_atoms])
    poc_t = losses.pocket_coord_loss([pred_res], [ctx.true_res])
    dm_t = losses.dis_map_loss([pred_atoms], [pred_res],
                               [ctx.true_atoms], [ctx.true_res])
    pred_t = losses.pocket_pred_loss(cls_t, cen_t, weights)
    j_l = losses.payoff_ligand(pred_t, lig_t, dm_t, weights)
    j_p = losses.payoff_protein(poc_t, dm_t, weights)
    report = losses.make_report(cls_t.item(), cen_t.item(), lig_t.item(),
                                poc_t.item(), dm_t.item(), weights)
    return report, {"J_L": j_l, "J_P": j_p}


@dataclass
class DeviationProbe:
    seed: int
    player: str
    magnitude: float
    delta_j: float = 0.0
    delta_f: float = 0.0
    residual: float = 0.0
    passed: bool = False


def verify_exact_potential(record, players, weights, net_cfg, graph_cfg,
                           player, seed, magnitude=1e-2, tol=1e-9,
                           gamma_scale=1.0):
    """One unilateral-deviation probe of the potential identity.

    Perturbs exactly one player's parameters and checks that the payoff
    change matches the potential change to ``tol`` (relative to 1+|dF|).
    """
    if player not in ("L", "P"):
        raise ValueError("player must be 'L' or 'P' (exactly one deviates)")
    ctx = build_context(record, players, net_cfg, graph_cfg)
    base, _ = joint_evaluate(ctx, players, weights, net_cfg)

    rng = np.random.default_rng(seed)
    deviated = dict(players)
    if player == "L":
        deviated["pocket"] = players["pocket"].perturbed(rng, magnitude)
        deviated["ligand"] = players["ligand"].perturbed(rng, magnitude)
    else:
        deviated["protein"] = players["protein"].perturbed(rng, magnitude)
    dev, _ = joint_evaluate(ctx, deviated, weights, net_cfg)

    dj = (dev.j_ligand - base.j_ligand) if player == "L" \
        else (dev.j_protein - base.j_protein)
    df = potential_value(dev, weights, gamma_scale) \
        - potential_value(base, weights, gamma_scale)
    residual = abs(dj - df)
    return DeviationProbe(seed=seed, player=player, magnitude=magnitude,
                          delta_j=dj, delta_f=df, residual=residual,
                          passed=residual <= tol * (1.0 + abs(df)))


def run_potential_probes(record, players, weights, net_cfg, graph_cfg,
                         n_probes=100, magnitude=1e-2, tol=1e-9):
    """n probes per player; returns the list of DeviationProbe results."""
    results = []
    for player in ("L", "P"):
        for seed in range(n_probes):
            results.append(verify_exact_potential(
                record, players, weights, net_cfg, graph_cfg, player, seed,
                magnitude=magnitude, tol=tol))
    return results


def write_probe_csv(path, probes):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe_seed", "player", "delta_J", "delta_F",
                         "residual", "passed"])
        for p in probes:
            writer.writerow([p.seed, p.player, repr(p.delta_j), repr(p.delta_f),
                             repr(p.residual), int(p.passed)])


@dataclass
class AfipResult:
    improvement_steps: list
    longest_run: int
    plateau_start: int
    plateau_is_stationary: bool


def extract_afip(trace, epsilon=1e-4):
    """Scan a train trace for epsilon-improvement steps of the acting player.

    A step improves when the acting player's payoff dropped by more than
    epsilon since the previous step with the *same* acting player: payoffs
    recorded under different acting phases are evaluated through different
    loop structures and are not comparable. The verdict reports the longest
    improvement run and whether the trailing plateau contains no further
    epsilon-improving step.
    """
    entries = trace.entries
    improvements = []
    last_payoff = {}
    for entry in entries:
        player = entry.acting
        attr = "j_ligand" if player == "L" else "j_protein"
        value = getattr(entry.report, attr)
        prev = last_payoff.get(player)
        if prev is not None and prev - value > epsilon:
            improvements.append(entry.step)
        last_payoff[player] = value

    longest = run = 0
    prev_step = None
    for s in improvements:
        run = run + 1 if prev_step == s - 1 else 1
        longest = max(longest, run)
        prev_step = s
    plateau_start = improvements[-1] + 1 if improvements else 0
    last_step = entries[-1].step if entries else 0
    return AfipResult(
        improvement_steps=improvements,
        longest_run=longest,
        plateau_start=plateau_start,
        plateau_is_stationary=plateau_start <= last_step,
    )


def nash_gap(records, players, weights, net_cfg, graph_cfg, steps=20, lr=1e-3):
    """Best-response probe: how much each player can still improve alone.

    Runs plain gradient descent for one player at a time on the frozen
    contexts and reports the payoff drop. ``steps=0`` gives exactly zero.
    """
    contexts = [build_context(r, players, net_cfg, graph_cfg) for r in records]

    def mean_payoff(current, key, grad_players=()):
        totals = []
        tensors = []
        for ctx in contexts:
            report, js = joint_evaluate(ctx, current, weights, net_cfg,
                                        grad_players=grad_players)
            totals.append(getattr(report, key))
            tensors.append(js["J_L" if key == "j_ligand" else "J_P"])
        return float(np.mean(totals)), tensors

    gaps = {}
    for player, key, stores in (("L", "j_ligand", ("pocket", "ligand")),
                                ("P", "j_protein", ("protein",))):
        if steps == 0:
            gaps[player] = 0.0
            continue
        current = {name: params.copy() for name, params in players.items()}
        before, _ = mean_payoff(current, key)
        for _ in range(steps):
            for name in stores:
                current[name].zero_grad()
            _, tensors = mean_payoff(current, key, grad_players=(player,))
            for t in tensors:
                ad.backward(t * (1.0 / len(tensors)))
            for name in stores:
                for _, p in current[name].items():
                    p.data -= lr * p.grad
        after, _ = mean_payoff(current, key)
        gaps[player] = before - after
    return gaps["L"], gaps["P"]
