import json
import math

import numpy as np
import pytest

import oar_evalkit as ok


def cube(shape, lo, hi):
    m = np.zeros(shape, dtype=np.uint8)
    m[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = 1
    return m


def test_dsc_of_shifted_cubes():
    a = cube((8, 8, 8), (1, 2, 2), (4, 5, 5))
    b = cube((8, 8, 8), (2, 2, 2), (5, 5, 5))
    assert ok.dsc(a, b) == pytest.approx(2 / 3, abs=1e-15)


def test_parallel_lines_distances():
    a = np.zeros((12, 5, 3), dtype=np.uint8)
    b = np.zeros_like(a)
    a[1:11, 1, 1] = 1
    b[1:11, 3, 1] = 1
    p2g, g2p = ok.surface_distances(a, b)
    pooled = np.concatenate([p2g, g2p])
    assert len(pooled) == 20
    assert ok.hd95(pooled) == 2.0
    assert ok.msd(pooled) == 2.0


def test_surface_distances_match_brute_force():
    rng = np.random.default_rng(3)
    spacing = (0.7, 1.3, 2.5)
    a = (rng.random((9, 7, 6)) < 0.3).astype(np.uint8)
    b = (rng.random((9, 7, 6)) < 0.3).astype(np.uint8)

    def surface(m):
        p = np.pad(m, 1)
        core = p[1:-1, 1:-1, 1:-1]
        inner = core.copy()
        for ax in range(3):
            for s in (1, -1):
                inner &= np.roll(p, s, axis=ax)[1:-1, 1:-1, 1:-1]
        return np.argwhere(core & ~inner & 1) * np.array(spacing)

    sa, sb = surface(a), surface(b)
    d = np.sqrt(((sb[:, None, :] - sa[None, :, :]) ** 2).sum(-1))
    expect = np.sort(np.concatenate([d.min(1), d.min(0)]))
    p2g, g2p = ok.surface_distances(a, b, spacing)
    got = np.sort(np.concatenate([p2g, g2p]))
    assert np.allclose(got, expect, atol=1e-9)
    assert ok.msd(got) == pytest.approx(expect.mean(), abs=1e-9)


def test_evaluate_pair_and_empty_prediction():
    a = cube((6, 6, 6), (1, 1, 1), (4, 4, 4))
    r = ok.evaluate_pair(a, a, spacing=(1.0, 1.0, 2.0))
    assert r["status"] == "evaluated" and r["dsc"] == 1.0 and r["hd95_mm"] == 0.0
    r = ok.evaluate_pair(a, np.zeros_like(a))
    assert r["status"] == "empty_prediction"


def test_distance_transform():
    f = np.zeros((5, 5, 5), dtype=np.uint8)
    f[0, 0, 0] = 1
    d = ok.distance_transform(f, spacing=(3.0, 4.0, 1.0))
    assert d[1, 1, 0] == pytest.approx(5.0)
    assert d.shape == (5, 5, 5)


def test_components():
    m = np.zeros((6, 6, 6), dtype=np.uint8)
    m[0:2, 0:2, 0:2] = 1
    m[4, 4, 4] = 1
    labels, sizes = ok.label_components(m, 6)
    assert sizes == [8, 1] and labels[4, 4, 4] == 2
    kept = ok.keep_largest_component(m)
    assert kept.sum() == 8 and kept[4, 4, 4] == 0


def test_resolve_overlaps_priority():
    shape = (4, 4, 4)
    liver = cube(shape, (0, 0, 0), (3, 3, 3))
    spleen = cube(shape, (2, 2, 2), (4, 4, 4))
    codes = {o["name"]: o["label_code"] for o in ok.organs()}
    out = ok.resolve_overlaps({"liver": liver, "spleen": spleen})
    assert out[2, 2, 2] == codes["spleen"]
    assert out[0, 0, 0] == codes["liver"]
    assert ok.priority_order()[0] == "spleen"
    with pytest.raises(ok.ValidationError):
        ok.resolve_overlaps({"thyroid": liver})


def test_statistics():
    r = ok.wilcoxon_signed_rank([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r["p_value"] == 0.0625 and r["method"] == "signed_rank_exact"
    assert ok.wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])["p_value"] == pytest.approx(0.1, abs=1e-15)
    assert ok.bonferroni([0.01, 0.2, 0.6]) == pytest.approx([0.03, 0.6, 1.0])
    assert ok.bonferroni([0.01], 6) == pytest.approx([0.06])
    assert [ok.stars(p) for p in (0.0005, 0.005, 0.03, 0.2)] == ["***", "**", "*", "ns"]
    assert ok.quartiles([1, 2, 3, 4, 5]) == (1, 2, 3, 4, 5)


def test_split_sizes_grouping_and_determinism():
    cases = [(f"c{i}", f"p{i}") for i in range(189)]
    plan = ok.make_split(cases, [132, 21, 36], 42)
    assert plan["sizes"] == {"train": 132, "val": 21, "test": 36}
    assert plan == ok.make_split(cases, [132, 21, 36], 42)
    multi = cases + [(f"r{i}", f"p{i}") for i in range(10)]
    plan = ok.make_split(multi, [7, 1, 2], 5)
    for i in range(10):
        assert plan["assignments"][f"r{i}"] == plan["assignments"][f"c{i}"]
    assert ok.largest_remainder(189, [132, 21, 36]) == [132, 21, 36]
    assert sum(ok.largest_remainder(378, [70, 15, 15])) == 378


def test_nifti_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 18, size=(7, 8, 9)).astype(np.uint16)
    path = str(tmp_path / "l.nii.gz")
    ok.write_labels(path, labels, spacing=(0.7, 0.7, 2.5), origin=(1.0, 2.0, 3.0), axis_codes="LPS")
    back, geom = ok.read_labels(path)
    assert np.array_equal(back, labels)
    assert geom["axis_codes"] == "LPS"
    assert geom["spacing"] == pytest.approx((0.7, 0.7, 2.5), rel=1e-6)

    image = rng.integers(-1000, 1000, size=(5, 6, 7)).astype(np.float64)
    ipath = str(tmp_path / "i.nii")
    ok.write_image(ipath, image, datatype="int16")
    back, _ = ok.read_image(ipath)
    assert np.array_equal(back, image)
    with pytest.raises(ok.IoError):
        ok.read_labels(str(tmp_path / "missing.nii.gz"))


def test_likert_summary():
    lines = [
        {"case_id": "c1", "organ": "liver", "rater_id": "A", "score": 5},
        {"case_id": "c1", "organ": "liver", "rater_id": "B", "score": 3},
    ]
    summary = json.loads(ok.likert_summary_json("\n".join(json.dumps(l) for l in lines)))
    liver = summary["organs"][0]
    assert liver["organ"] == "liver"
    assert math.isclose(liver["combined_mean"], 4.0)
