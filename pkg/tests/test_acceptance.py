"""Acceptance suite: one test per published criterion, at its stated
tolerance. Each test prints a PASS line (visible with -v/-s) after its
assertions hold."""
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import ndimage

from pap import geometry as g
from pap.dataset import classify_difficulty
from pap.geometry import ErpImage, ViewportSpec
from pap.grid import GridSpec, cell_region
from pap.metrics import SampleScore, aggregate, mask_overlap
from pap.mock_server import oracle_backend_set
from pap.pipeline import PipelineConfig, run_pipeline

ACCEPT = "ACCEPTANCE"


def random_spec(rng, pitch_range=(-75, 75), hfov_range=(20, 160),
                dims=((40, 400), (40, 400))):
    return ViewportSpec(
        float(rng.uniform(-180, 180)),
        float(rng.uniform(*pitch_range)),
        float(rng.uniform(*hfov_range)),
        int(rng.integers(*dims[0])),
        int(rng.integers(*dims[1])),
    )


class TestProjectionRoundTrip:
    def test_round_trip_10k_pairs(self):
        rng = np.random.default_rng(2024)
        erp_w, erp_h = 11904, 5952
        n_specs, pts_per_spec = 100, 100
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(n_specs):
            spec = random_spec(rng)
            f = g.focal_length(spec)
            r = g.rotation_matrix(spec.yaw_deg, spec.pitch_deg)
            x = rng.uniform(0, spec.width - 1e-9, pts_per_spec)
            y = rng.uniform(0, spec.height - 1e-9, pts_per_spec)
            # forward: pixel -> world -> spherical -> ERP coords
            cam = np.stack([x - spec.cx, y - spec.cy, np.full_like(x, f)])
            world = r @ cam
            lon = np.arctan2(world[0], world[2])
            lat = np.arcsin(world[1] / np.linalg.norm(world, axis=0))
            u = (lon / (2 * math.pi) + 0.5) * erp_w % erp_w
            v = (lat / math.pi + 0.5) * erp_h
            # backward: ERP coords -> spherical -> inverse rotation -> plane
            lon2 = (u / erp_w - 0.5) * 2 * math.pi
            lat2 = (v / erp_h - 0.5) * math.pi
            d = np.stack(g.direction_from_spherical(lon2, lat2))
            cam2 = r.T @ d
            x2 = f * cam2[0] / cam2[2] + spec.cx
            y2 = f * cam2[1] / cam2[2] + spec.cy
            worst = max(worst, float(np.hypot(x2 - x, y2 - y).max()))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-6, worst
        assert elapsed < 5.0, elapsed
        print(f"\n{ACCEPT} projection-round-trip: PASS "
              f"(10000 pairs, worst {worst:.2e} px, {elapsed:.2f} s)")


class TestRollEquivalence:
    def test_50_random_specs(self):
        rng = np.random.default_rng(7)
        erp = rng.integers(0, 256, (512, 1024, 3), dtype=np.uint8)
        w = erp.shape[1]
        fail_frac = []
        for _ in range(50):
            spec = random_spec(rng, dims=((64, 200), (64, 200)))
            k = int(rng.integers(1, w))
            rolled = np.roll(erp, k, axis=1)
            shifted = ViewportSpec(spec.yaw_deg + k * 360.0 / w, spec.pitch_deg,
                                   spec.hfov_deg, spec.width, spec.height)
            a = g.extract_viewport(erp, spec).astype(np.int16)
            b = g.extract_viewport(rolled, shifted).astype(np.int16)
            frac_ok = float((np.abs(a - b) <= 1).mean())
            fail_frac.append(frac_ok)
            assert frac_ok >= 0.999, (spec, k, frac_ok)
        print(f"\n{ACCEPT} roll-equivalence: PASS "
              f"(50 specs, min within-1 fraction {min(fail_frac):.6f})")


class TestFootprintIdentity:
    def test_restricted_equals_full_bit_exact(self):
        rng = np.random.default_rng(99)
        specs = [
            ViewportSpec(179.5, 5.0, 100.0, 80, 60),   # seam-crossing
            ViewportSpec(12.0, 80.0, 70.0, 80, 60),    # near-pole
        ]
        while len(specs) < 20:
            specs.append(random_spec(rng, dims=((40, 120), (40, 120))))
        for spec in specs:
            mask = rng.random((spec.height, spec.width)) > 0.35
            restricted = g.reproject_mask_to_erp(mask, spec, 500, 250,
                                                 restrict_scan=True)
            full = g.reproject_mask_to_erp(mask, spec, 500, 250,
                                           restrict_scan=False)
            assert np.array_equal(restricted, full), spec
        print(f"\n{ACCEPT} footprint-identity: PASS (20 specs, bit-exact)")


class TestSolidAngle:
    def test_monte_carlo_within_2pct(self):
        rng = np.random.default_rng(314)
        n = 1_000_000
        erp_w, erp_h = 2000, 1000
        specs = []
        while len(specs) < 5:
            spec = random_spec(rng, pitch_range=(-50, 50), hfov_range=(40, 140),
                               dims=((200, 800), (150, 600)))
            if abs(spec.pitch_deg) + spec.vfov_deg / 2 < 80.0:
                specs.append(spec)
        for spec in specs:
            footprint = g.reproject_mask_to_erp(
                np.ones((spec.height, spec.width), bool), spec, erp_w, erp_h)
            dirs = rng.normal(size=(n, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            # frustum membership from first principles
            r_inv = g.rotation_matrix(spec.yaw_deg, spec.pitch_deg).T
            cam = dirs @ r_inv.T
            f = g.focal_length(spec)
            with np.errstate(divide="ignore", invalid="ignore"):
                px = f * cam[:, 0] / cam[:, 2] + spec.cx
                py = f * cam[:, 1] / cam[:, 2] + spec.cy
            in_frustum = (cam[:, 2] > 0) & (px >= 0) & (px < spec.width) \
                & (py >= 0) & (py < spec.height)
            # footprint membership via the ERP raster
            lon = np.arctan2(dirs[:, 0], dirs[:, 2])
            lat = np.arcsin(np.clip(dirs[:, 1], -1, 1))
            u = np.floor((lon / (2 * math.pi) + 0.5) * erp_w + 0.5).astype(int) % erp_w
            v = np.minimum(np.floor((lat / math.pi + 0.5) * erp_h + 0.5).astype(int),
                           erp_h - 1)
            in_footprint = footprint[v, u]
            n_frustum = int(in_frustum.sum())
            n_footprint = int(in_footprint.sum())
            rel = abs(n_footprint - n_frustum) / n_frustum
            assert rel < 0.02, (spec, rel)
        print(f"\n{ACCEPT} solid-angle: PASS (5 specs, 1e6 samples each, <2%)")


class TestGridTiling:
    def test_500_random_partitions(self):
        rng = np.random.default_rng(17)
        for _ in range(500):
            w = int(rng.integers(4, 3000))
            h = int(rng.integers(4, 1500))
            grid = GridSpec(cols=int(rng.integers(1, 11)),
                            rows=int(rng.integers(1, 11)))
            # exact partition without materializing w*h cells: boundaries
            # must chain with no gap/overlap and areas must sum exactly
            area = 0
            for row in range(grid.rows):
                prev_x = 0
                for col in range(grid.cols):
                    idx = row * grid.cols + col + 1
                    r = cell_region(idx, grid, w, h)
                    assert r.x0 == prev_x
                    prev_x = r.x0 + r.width
                    area += int(r.width) * int(r.height)
                assert prev_x == w
            col0 = [cell_region(1 + row * grid.cols, grid, w, h)
                    for row in range(grid.rows)]
            prev_y = 0
            for r in col0:
                assert r.y0 == prev_y
                prev_y = r.y0 + r.height
            assert prev_y == h
            assert area == w * h
        print(f"\n{ACCEPT} grid-tiling: PASS (500 partitions exact)")


@pytest.fixture(scope="module")
def oracle_run(synthetic_dataset):
    """One noise-free oracle pipeline run per scene, with wall time."""
    backends = oracle_backend_set(synthetic_dataset)
    cfg = PipelineConfig()

    def run_one(rec):
        result = run_pipeline(ErpImage(synthetic_dataset.image(rec)), rec.question,
                              backends, cfg, image_id=rec.id)
        return rec, result

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=4) as pool:
        rows = list(pool.map(run_one, synthetic_dataset.records))
    elapsed = time.perf_counter() - t0
    return rows, elapsed


class TestEndToEndOracle:
    def test_dataset_shape(self, synthetic_dataset):
        ds = synthetic_dataset
        assert len(ds) == 30
        widths = {ds.image(r).shape[1] for r in ds.records}
        assert widths == {2000, 4000}
        seam = sum(1 for r in ds.records
                   if ds.mask(r)[:, 0].any() and ds.mask(r)[:, -1].any())
        tiny = sum(1 for r in ds.records
                   if ds.mask(r).sum() / ds.mask(r).size < 0.001)
        assert seam >= 5
        assert tiny >= 5

    def test_oracle_equivalence(self, synthetic_dataset, oracle_run):
        rows, elapsed = oracle_run
        ds = synthetic_dataset
        scores = []
        for rec, result in rows:
            gt = ds.mask(rec)
            s = mask_overlap(result.mask_erp, gt)
            assert s.iou >= 0.95, (rec.id, s.iou)
            scores.append(s)
            if gt[:, 0].any() and gt[:, -1].any():
                # seam-split predictions must be a single component after
                # unwrapping the seam
                rolled = np.roll(result.mask_erp, result.mask_erp.shape[1] // 2,
                                 axis=1)
                _, n_components = ndimage.label(rolled)
                assert n_components == 1, rec.id
        report = aggregate(scores)
        assert report.giou >= 0.95
        assert elapsed < 120.0, elapsed
        print(f"\n{ACCEPT} end-to-end-oracle: PASS "
              f"(30 scenes, gIoU {report.giou:.4f}, "
              f"min IoU {min(s.iou for s in scores):.4f}, {elapsed:.1f} s)")


class TestRecursionBehavior:
    def test_depths(self, synthetic_dataset, oracle_run):
        rows, _ = oracle_run
        ds = synthetic_dataset
        max_depth = PipelineConfig().routing.max_depth
        tiny_checked = multi_checked = 0
        for rec, result in rows:
            state = result.routing_state
            assert state.depth <= max_depth
            gt = ds.mask(rec)
            if gt.sum() / gt.size < 0.001:
                # sub-0.1% targets recurse exactly once
                assert state.depth == 1, (rec.id, state.depth)
                assert len(state.history) == 2
                assert state.history[0].small and len(state.history[0].grid_boxes) == 1
                tiny_checked += 1
            elif len(state.history[0].grid_boxes) >= 2:
                assert state.depth == 0, (rec.id, state.depth)
                multi_checked += 1
        assert tiny_checked >= 5
        assert multi_checked >= 5
        print(f"\n{ACCEPT} recursion-behavior: PASS "
              f"({tiny_checked} sub-scale at depth 1, "
              f"{multi_checked} multi-cell at depth 0)")


class TestAblationShape:
    def test_adaptive_gaze_beats_raw_crop_with_boxfill(self, synthetic_dataset):
        ds = synthetic_dataset
        backends = oracle_backend_set(ds, sam_mode="boxfill")

        def run_variant(adaptive):
            cfg = PipelineConfig(adaptive_gaze=adaptive)

            def run_one(rec):
                try:
                    result = run_pipeline(ErpImage(ds.image(rec)), rec.question,
                                          backends, cfg, image_id=rec.id)
                    return mask_overlap(result.mask_erp, ds.mask(rec))
                except Exception:
                    return SampleScore(0, int(ds.mask(rec).sum()), 0.0)

            with ThreadPoolExecutor(max_workers=4) as pool:
                return aggregate(list(pool.map(run_one, ds.records)))

        with_ag = run_variant(True)
        without_ag = run_variant(False)
        assert with_ag.giou > without_ag.giou, (with_ag.giou, without_ag.giou)
        print(f"\n{ACCEPT} ablation-shape: PASS "
              f"(boxfill segmenter: gIoU {with_ag.giou:.4f} with gaze "
              f"> {without_ag.giou:.4f} raw crop)")


class TestMetricOracle:
    def test_brute_force_equivalence(self):
        from test_metrics import brute_force_report

        rng = np.random.default_rng(4242)
        samples = []
        for _ in range(1000):
            union = int(rng.integers(0, 100000))
            inter = int(rng.integers(0, union + 1))
            v = 1.0 if union == 0 else inter / union
            samples.append((inter, union, v))
        report = aggregate([SampleScore(*s) for s in samples])
        giou, ciou, p50, p50_95 = brute_force_report(samples)
        assert abs(report.giou - giou) < 1e-12
        assert abs(report.ciou - ciou) < 1e-12
        assert abs(report.p50 - p50) < 1e-12
        assert abs(report.p50_95 - p50_95) < 1e-12
        # strict '>' convention pinned: IoU 0.7 passes 4 of 10 thresholds
        assert aggregate([SampleScore(7, 10, 0.7)]).p50_95 == pytest.approx(0.4)
        print(f"\n{ACCEPT} metric-oracle: PASS (1000 tuples, <=1e-12; "
              f"strict '>' pinned)")


class TestHardNormalSplit:
    def test_nine_record_fixture(self):
        w, h = 400, 200

        def blank():
            return np.zeros((h, w), dtype=bool)

        fixture = []
        m = blank(); m[:140, :200] = True                      # 35% large
        fixture.append((m, "hard"))
        m = blank(); m[:124, :200] = True                      # 31% large
        fixture.append((m, "hard"))
        m = blank(); m[100, 200:240] = True                    # 0.05% tiny
        fixture.append((m, "hard"))
        m = blank(); m[90:110, :5] = True; m[90:110, -5:] = True  # seam
        fixture.append((m, "hard"))
        m = blank(); m[:150, :250] = True; m[160:170, -4:] = True  # large + edge
        fixture.append((m, "hard"))
        m = blank(); m[80:120, 150:250] = True                 # 5% centered
        fixture.append((m, "normal"))
        m = blank(); m[:116, :200] = True                      # 29% below cut
        fixture.append((m, "normal"))
        m = blank(); m[100:104, 180:220] = True                # 0.2% above cut
        fixture.append((m, "normal"))
        m = blank(); m[60:140, :60] = True                     # left edge only
        fixture.append((m, "normal"))

        assert len(fixture) == 9
        for i, (mask, expected) in enumerate(fixture):
            assert classify_difficulty(mask) == expected, (i, expected)
        print(f"\n{ACCEPT} hard-normal-split: PASS (9 records exact)")
