import numpy as np
import pytest

from dockgame.graph import (ComplexRecord, GraphConfig, InvalidComplexError,
                            PocketSelection, build_complex_graph,
                            extract_pocket_subgraph, place_ligand_at_center,
                            protein_center)


def _record(apo_lig, apo_res, labels=None, bonds=None):
    apo_lig = np.asarray(apo_lig, dtype=np.float64)
    apo_res = np.asarray(apo_res, dtype=np.float64)
    n_l, n_p = len(apo_lig), len(apo_res)
    if labels is None:
        labels = np.zeros(n_p, dtype=np.int64)
        labels[0] = 1
    return ComplexRecord(
        complex_id="t",
        atom_feats=np.ones((n_l, 2)),
        apo_ligand=apo_lig,
        holo_ligand=apo_lig.copy(),
        residue_feats=np.ones((n_p, 2)),
        apo_residues=apo_res,
        holo_residues=apo_res.copy(),
        pocket_labels=np.asarray(labels, dtype=np.int64),
        bonds=np.asarray(bonds if bonds is not None else [], dtype=np.int64).reshape(-1, 2),
    )


def test_protein_edge_inside_cutoff():
    g = build_complex_graph(_record([[0, 0, 0]], [[0, 0, 0], [0, 0, 7.9]]))
    assert g.protein_edges.tolist() == [[0, 1]]


def test_no_protein_edge_outside_cutoff():
    g = build_complex_graph(_record([[0, 0, 0]], [[0, 0, 0], [0, 0, 8.1]]))
    assert g.protein_edges.size == 0


def test_protein_edge_cutoff_boundary_inclusive():
    g = build_complex_graph(_record([[0, 0, 0]], [[0, 0, 0], [0, 0, 8.0]]))
    assert g.protein_edges.tolist() == [[0, 1]]


def test_interface_edge_at_distance_five():
    g = build_complex_graph(_record([[0, 0, 0]], [[3, 4, 0]]))
    assert g.interface_edges.tolist() == [[0, 0]]


def test_interface_cutoff_boundary_inclusive():
    g = build_complex_graph(_record([[0, 0, 0]], [[0, 0, 10.0], [0, 0, 10.1]]))
    assert g.interface_edges.tolist() == [[0, 0]]


def test_empty_complex_rejected():
    rec = _record([[0, 0, 0]], [[0, 0, 0]])
    rec.atom_feats = np.zeros((0, 2))
    rec.apo_ligand = np.zeros((0, 3))
    rec.holo_ligand = np.zeros((0, 3))
    with pytest.raises(InvalidComplexError):
        rec.validate()


def test_place_ligand_centroid_shift():
    g = build_complex_graph(_record([[0, 0, 0], [2, 0, 0]], [[5, 0, 0]]))
    placed = place_ligand_at_center(g, np.array([10.0, 0.0, 0.0]))
    np.testing.assert_allclose(placed.ligand_coords, [[9, 0, 0], [11, 0, 0]])


def test_place_ligand_noop_when_already_centred():
    g = build_complex_graph(_record([[1, 1, 1]], [[0, 0, 0]]))
    placed = place_ligand_at_center(g, np.array([1.0, 1.0, 1.0]))
    np.testing.assert_array_equal(placed.ligand_coords, g.ligand_coords)


def test_place_ligand_idempotent(record):
    g = build_complex_graph(record)
    target = protein_center(g)
    once = place_ligand_at_center(g, target)
    twice = place_ligand_at_center(once, target)
    np.testing.assert_allclose(once.ligand_coords, twice.ligand_coords, atol=1e-12)
    np.testing.assert_allclose(once.ligand_coords.mean(axis=0), target, atol=1e-12)
    np.testing.assert_array_equal(once.interface_edges, twice.interface_edges)


def test_place_ligand_recomputes_interface_edges():
    g = build_complex_graph(_record([[100, 0, 0]], [[0, 0, 0]]))
    assert g.interface_edges.size == 0
    placed = place_ligand_at_center(g, np.array([3.0, 0.0, 0.0]))
    assert placed.interface_edges.tolist() == [[0, 0]]


def test_subgraph_selection_and_remap():
    g = build_complex_graph(_record(
        [[0, 0, 0]], [[0, 0, 0], [0, 0, 4], [0, 0, 30]], labels=[1, 0, 1]))
    sel = PocketSelection(indicator=np.array([1, 0, 1]),
                          probs=np.zeros(3), center=np.zeros(3))
    sub = extract_pocket_subgraph(g, sel)
    assert sub.n_residues == 2
    assert sub.residue_index.tolist() == [0, 2]
    # residues 0 and 2 are 30 A apart: no surviving protein edge
    assert sub.protein_edges.size == 0


def test_subgraph_protein_edges_match_brute_force(record, rng):
    g = build_complex_graph(record)
    indicator = (rng.random(g.n_residues) < 0.5).astype(np.int64)
    indicator[0] = 1
    sel = PocketSelection(indicator=indicator, probs=np.zeros(g.n_residues),
                          center=np.zeros(3))
    sub = extract_pocket_subgraph(g, sel)
    keep = np.nonzero(indicator)[0]
    want = set()
    for i, j in g.protein_edges:
        if indicator[i] and indicator[j]:
            want.add((int(np.searchsorted(keep, i)), int(np.searchsorted(keep, j))))
    assert {tuple(e) for e in sub.protein_edges.tolist()} == want


def test_subgraph_identity_selection(record):
    g = build_complex_graph(record)
    sel = PocketSelection(indicator=np.ones(g.n_residues, dtype=np.int64),
                          probs=np.zeros(g.n_residues), center=np.zeros(3))
    sub = extract_pocket_subgraph(g, sel)
    np.testing.assert_array_equal(sub.protein_edges, g.protein_edges)
    np.testing.assert_array_equal(sub.interface_edges, g.interface_edges)
    np.testing.assert_array_equal(sub.residue_coords, g.residue_coords)


def test_subgraph_rejects_empty_selection(record):
    g = build_complex_graph(record)
    sel = PocketSelection(indicator=np.zeros(g.n_residues, dtype=np.int64),
                          probs=np.zeros(g.n_residues), center=np.zeros(3))
    with pytest.raises(InvalidComplexError):
        extract_pocket_subgraph(g, sel)


def test_construction_translation_invariant(record):
    g1 = build_complex_graph(record)
    shifted = _record(record.apo_ligand + 5.0, record.apo_residues + 5.0,
                      labels=record.pocket_labels, bonds=record.bonds)
    shifted.atom_feats = record.atom_feats
    shifted.residue_feats = record.residue_feats
    g2 = build_complex_graph(shifted)
    np.testing.assert_array_equal(g1.protein_edges, g2.protein_edges)
    np.testing.assert_array_equal(g1.interface_edges, g2.interface_edges)


def test_rebuild_is_deterministic(record):
    g1 = build_complex_graph(record)
    g2 = build_complex_graph(record)
    np.testing.assert_array_equal(g1.protein_edges, g2.protein_edges)
    np.testing.assert_array_equal(g1.interface_edges, g2.interface_edges)
