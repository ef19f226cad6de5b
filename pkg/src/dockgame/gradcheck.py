"""Central finite-difference verification of every parameter tensor.

Analytic gradients from the tape are compared against central differences
on a small fixed probe complex, with dropout off so every objective is
smooth in the parameters.

The docking models are checked through the training-phase forward with a
single outer round (their perturbation then cannot reach the discrete
pocket selection, the interface-edge recompute, or the stop-gradient pose
exchange, so the objective is smooth). The pocket model is checked through
the frozen shared-context evaluation: in the full pipeline its output also
moves the ligand placement and residue selection, which are deliberate
gradient stops, so a finite difference of the full pipeline would measure
pathways the tape correctly excludes.
"""

from dataclasses import replace

import numpy as np

from . import autodiff as ad
from .data import SynthSpec, generate_complex
from .engine import LoopConfig, _phase_forward
from .game import build_context, joint_evaluate
from .graph import GraphConfig

PROBE_SPEC = SynthSpec(
    n_complexes=1, atoms_min=4, atoms_max=4, residues_min=6, residues_max=6,
    pocket_min=3, pocket_max=3, displacement=3.0, noise_sigma=0.05,
    pocket_deform=0.3, seed=7,
)


def make_probe(seed=7):
    return generate_complex(replace(PROBE_SPEC, seed=seed), 0)


def _entry_indices(shape, samples, rng):
    size = int(np.prod(shape)) if shape else 1
    if size <= samples:
        return np.arange(size)
    return rng.choice(size, size=samples, replace=False)


def _check_store(store, objective, samples, step, rng):
    """FD-check one parameter store against a scalar objective callable."""
    store.zero_grad()
    loss_t = objective()
    ad.backward(loss_t)
    analytic = {name: t.grad.copy() for name, t in store.items()}

    def value():
        with ad.no_grad():
            return objective().item()

    results = {}
    for pname, tensor in store.items():
        worst = 0.0
        for flat in _entry_indices(tensor.data.shape, samples, rng):
            flat = int(flat)
            original = tensor.data.ravel()[flat]
            tensor.data.ravel()[flat] = original + step
            up = value()
            tensor.data.ravel()[flat] = original - step
            down = value()
            tensor.data.ravel()[flat] = original
            fd = (up - down) / (2.0 * step)
            a = analytic[pname].ravel()[flat]
            if abs(fd) < 1e-10 and abs(a) < 1e-10:
                err = 0.0
            else:
                err = abs(fd - a) / max(abs(fd), abs(a), 1e-8)
            worst = max(worst, err)
        results[pname] = worst
    return results


def finite_difference_check(record, players, weights, net_cfg, graph_cfg,
                            step=1e-4, samples_per_tensor=6, seed=0):
    """Max relative gradient error per parameter tensor.

    Returns ``{(store, tensor_name): max_rel_error}`` covering all three
    models.
    """
    loop_cfg = LoopConfig(m_ligand=1, m_protein=1, n_ligand=2, n_protein=2,
                          dropout=0.0)
    rng = np.random.default_rng(seed)
    results = {}

    def phase(acting):
        loss_t, _ = _phase_forward(record, players, weights, net_cfg,
                                   loop_cfg, graph_cfg, acting)
        return loss_t

    for store, errs in (
            ("ligand", _check_store(players["ligand"], lambda: phase("L"),
                                    samples_per_tensor, step, rng)),
            ("protein", _check_store(players["protein"], lambda: phase("P"),
                                     samples_per_tensor, step, rng))):
        for pname, err in errs.items():
            results[(store, pname)] = err

    ctx = build_context(record, players, net_cfg, graph_cfg)

    def pocket_objective():
        _, js = joint_evaluate(ctx, players, weights, net_cfg,
                               grad_players=("L",))
        return js["J_L"]

    for pname, err in _check_store(players["pocket"], pocket_objective,
                                   samples_per_tensor, step, rng).items():
        results[("pocket", pname)] = err
    return results


def run_gradcheck(players, weights, net_cfg, graph_cfg=GraphConfig(),
                  seed=7, **kwargs):
    record = make_probe(seed)
    errors = finite_difference_check(record, players, weights, net_cfg,
                                     graph_cfg, **kwargs)
    return errors, max(errors.values())
