"""Synthetic complex generation with known ground truth, plus dataset IO.

Generation replaces real structure pipelines at desk scale: residues sit on
a jittered lattice, a contiguous spatial cluster is labelled as the pocket,
and the ligand's apo pose is a rigid motion of its holo pose away from the
pocket, so the apo-to-holo mapping is learnable by construction.

Datasets are stored as line-delimited JSON with a schema header line.
Floats use Python's shortest round-trip representation, so save/load is
lossless.
"""

import json
from dataclasses import dataclass

import numpy as np

from .graph import ComplexRecord

SCHEMA_VERSION = "dockgame-complex-v1"


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_complexes: int = 20
    atoms_min: int = 8
    atoms_max: int = 15
    residues_min: int = 24
    residues_max: int = 40
    pocket_min: int = 6
    pocket_max: int = 10
    displacement: float = 8.0
    noise_sigma: float = 0.1
    pocket_deform: float = 0.5
    d_l: int = 8
    d_p: int = 16
    seed: int = 0

    def validate(self):
        if self.n_complexes < 1:
            raise ValueError("need at least one complex")
        if self.atoms_min < 1 or self.atoms_max < self.atoms_min:
            raise ValueError("empty atom-count range")
        if self.residues_min < 1 or self.residues_max < self.residues_min:
            raise ValueError("empty residue-count range")
        if self.pocket_min < 1 or self.pocket_max < self.pocket_min:
            raise ValueError("empty pocket-size range")
        if self.pocket_max > self.residues_min:
            raise ValueError("pocket may exceed protein size")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        return self


def _random_rotation(rng):
    # QR of a Gaussian matrix, sign-fixed to a proper rotation
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _lattice_points(n, rng, spacing=4.0, jitter=0.8):
    side = int(np.ceil(n ** (1.0 / 3.0)))
    grid = np.array([(i, j, k) for i in range(side)
                     for j in range(side) for k in range(side)], dtype=np.float64)
    pts = grid[:n] * spacing
    return pts + jitter * rng.standard_normal(pts.shape)


def _ligand_shape(n, rng, bond_length=1.5):
    """Connected atom cloud: growth along a random spanning tree plus a few
    extra edges between spatially close atoms."""
    coords = np.zeros((n, 3))
    bonds = []
    for i in range(1, n):
        parent = int(rng.integers(0, i))
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction) + 1e-12
        coords[i] = coords[parent] + bond_length * direction
        bonds.append((parent, i))
    # a couple of ring-closing edges
    extra = int(rng.integers(0, max(1, n // 4) + 1))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j and (min(i, j), max(i, j)) not in bonds:
            bonds.append((min(int(i), int(j)), max(int(i), int(j))))
    bond_arr = np.array(sorted(set(bonds)), dtype=np.int64).reshape(-1, 2)
    return coords - coords.mean(axis=0), bond_arr


def generate_complex(spec, index):
    """One reproducible record; the rng is derived from (seed, index) so
    generation order does not matter."""
    rng = np.random.default_rng([spec.seed, index])
    n_p = int(rng.integers(spec.residues_min, spec.residues_max + 1))
    n_l = int(rng.integers(spec.atoms_min, spec.atoms_max + 1))
    n_pocket = int(rng.integers(spec.pocket_min, min(spec.pocket_max, n_p) + 1))

    apo_res = _lattice_points(n_p, rng)
    seed_residue = int(rng.integers(0, n_p))
    dist = np.linalg.norm(apo_res - apo_res[seed_residue], axis=1)
    pocket_idx = np.argsort(dist, kind="stable")[:n_pocket]
    labels = np.zeros(n_p, dtype=np.int64)
    labels[pocket_idx] = 1

    # bounded smooth deformation of the pocket: a shared drift plus a
    # radial component toward the pocket centroid
    holo_res = apo_res.copy()
    pocket_center = apo_res[pocket_idx].mean(axis=0)
    drift = spec.pocket_deform * rng.standard_normal(3) / np.sqrt(3.0)
    radial = pocket_center - apo_res[pocket_idx]
    radial /= np.linalg.norm(radial, axis=1, keepdims=True) + 1e-12
    holo_res[pocket_idx] += drift + 0.3 * spec.pocket_deform * radial \
        + 0.1 * spec.pocket_deform * rng.standard_normal((n_pocket, 3))

    shape, bonds = _ligand_shape(n_l, rng)
    holo_center = holo_res[pocket_idx].mean(axis=0) \
        + 0.5 * rng.standard_normal(3)
    holo_lig = shape + holo_center

    # apo pose: rigid motion away from the pocket plus conformational noise;
    # zero displacement means no rigid motion, so apo degenerates to holo
    rot = _random_rotation(rng) if spec.displacement > 0 else np.eye(3)
    away = rng.standard_normal(3)
    away /= np.linalg.norm(away) + 1e-12
    apo_center = holo_center + spec.displacement * away
    apo_lig = (shape @ rot.T) + apo_center \
        + spec.noise_sigma * rng.standard_normal((n_l, 3))

    return ComplexRecord(
        complex_id=f"synth-{spec.seed}-{index:05d}",
        atom_feats=rng.standard_normal((n_l, spec.d_l)),
        apo_ligand=apo_lig,
        holo_ligand=holo_lig,
        residue_feats=rng.standard_normal((n_p, spec.d_p)),
        apo_residues=apo_res,
        holo_residues=holo_res,
        pocket_labels=labels,
        bonds=bonds,
    ).validate()


def generate(spec):
    spec.validate()
    return [generate_complex(spec, i) for i in range(spec.n_complexes)]


def _record_to_json(record):
    return {
        "id": record.complex_id,
        "atoms": [
            {"feat": record.atom_feats[i].tolist(),
             "apo": record.apo_ligand[i].tolist(),
             "holo": record.holo_ligand[i].tolist()}
            for i in range(record.n_atoms)
        ],
        "residues": [
            {"feat": record.residue_feats[j].tolist(),
             "apo": record.apo_residues[j].tolist(),
             "holo": record.holo_residues[j].tolist(),
             "pocket": int(record.pocket_labels[j])}
            for j in range(record.n_residues)
        ],
        "bonds": record.bonds.tolist(),
    }


def _record_from_json(obj):
    atoms = obj["atoms"]
    residues = obj["residues"]
    return ComplexRecord(
        complex_id=str(obj["id"]),
        atom_feats=np.array([a["feat"] for a in atoms], dtype=np.float64),
        apo_ligand=np.array([a["apo"] for a in atoms], dtype=np.float64),
        holo_ligand=np.array([a["holo"] for a in atoms], dtype=np.float64),
        residue_feats=np.array([r["feat"] for r in residues], dtype=np.float64),
        apo_residues=np.array([r["apo"] for r in residues], dtype=np.float64),
        holo_residues=np.array([r["holo"] for r in residues], dtype=np.float64),
        pocket_labels=np.array([r["pocket"] for r in residues], dtype=np.int64),
        bonds=np.array(obj["bonds"], dtype=np.int64).reshape(-1, 2),
    ).validate()


def save_dataset(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SCHEMA_VERSION}) + "\n")
        for record in records:
            fh.write(json.dumps(_record_to_json(record)) + "\n")


def load_dataset(path):
    """Parse a dataset file; returns ``(records, warnings)``.

    Malformed lines raise :class:`DatasetFormatError` naming the line; a
    completely empty file yields an empty dataset with a warning.
    """
    warnings = []
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        return [], ["empty dataset file"]
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: invalid header ({exc})") from exc
    if not isinstance(header, dict) or header.get("schema") != SCHEMA_VERSION:
        raise DatasetFormatError(f"line 1: unsupported schema {header!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(_record_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from exc
    if not records:
        warnings.append("dataset contains a header but no records")
    return records, warnings


def split(records, fractions, seed):
    """Disjoint, exhaustive (train, val, test) split.

    Val and test sizes are ``round(fraction * n)``; train takes the rest.
    """
    f_train, f_val, f_test = fractions
    total = f_train + f_val + f_test
    if not np.isclose(total, 1.0):
        raise ValueError("fractions must sum to 1")
    n = len(records)
    n_val = int(round(f_val * n))
    n_test = int(round(f_test * n))
    order = np.random.default_rng(seed).permutation(n)
    val = [records[i] for i in order[:n_val]]
    test = [records[i] for i in order[n_val:n_val + n_test]]
    train = [records[i] for i in order[n_val + n_test:]]
    return train, val, test
