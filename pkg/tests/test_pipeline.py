import json

import numpy as np
import pytest

from capsel.dataio import load_dataset, sample_images, write_xtrt
from capsel.errors import ValidationError
from capsel.family import FamilyConfig, build_family
from capsel.network import init_network, input_gradient
from capsel.pipeline import (
    RunConfig,
    config_seed,
    emit_curve_csv,
    emit_report,
    report_payload,
    run_selection,
)
from capsel.sensitivity import SensitivityCurve, detect_collapse, sensitivity_score

REPORT_KEYS = {"family", "variations", "objective", "mode", "tie_break",
               "k_star", "selected", "seed", "num_samples", "warnings"}
FAMILY_ENTRY_KEYS = {"cap_index", "cap", "channels", "param_count", "s_raw", "s_norm"}


@pytest.fixture(scope="module")
def datadir(tmp_path_factory):
    root = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(42)
    for i in range(6):
        write_xtrt(root / f"img{i:02d}.xtrt", rng.standard_normal((1, 16, 16)))
    return root


def small_rc(datadir, **kw):
    defaults = dict(data_dir=datadir, num_samples=3, seed=1, base_channels=4,
                    max_channels=16, stages=3, out_classes=2)
    defaults.update(kw)
    return RunConfig(**defaults)


class TestRunSelection:
    def test_end_to_end_shapes(self, datadir):
        report, curve = run_selection(small_rc(datadir))
        assert len(curve) == 5  # log2(16)+1
        assert report.selected is not None
        assert report.seed == 1 and report.num_samples == 3
        assert report.k_star in report.candidates

    def test_report_self_consistent(self, datadir):
        report, curve = run_selection(small_rc(datadir))
        again = detect_collapse(curve, report.mode, report.tie_break)
        assert again.k_star == report.k_star

    def test_selected_params_below_widest(self, datadir):
        report, _ = run_selection(small_rc(datadir))
        assert report.selected.param_count < report.family[0].param_count

    def test_byte_identical_reports(self, datadir, tmp_path):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        run_selection(small_rc(datadir, out_path=out1))
        run_selection(small_rc(datadir, out_path=out2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_batch_composition_independence(self, datadir):
        # squared per-image gradient norms add across batches
        ds = load_dataset(datadir)
        fc = FamilyConfig(input_size=(16, 16), base_channels=4, max_channels=16,
                          stages=3, in_channels=1, out_classes=2)
        cfg = build_family(fc)[2]
        net = init_network(cfg, fc, config_seed(1, cfg.cap_index))
        batch = sample_images(ds, 2, 1)
        joint = sensitivity_score(input_gradient(net, batch))
        parts = [sensitivity_score(input_gradient(net, batch[i:i + 1]))
                 for i in range(2)]
        combined = np.sqrt((parts[0] ** 2 + parts[1] ** 2) / 2)
        assert abs(joint - combined) <= 1e-10 * max(joint, combined)

    def test_bad_sample_count(self, datadir):
        with pytest.raises(ValidationError):
            run_selection(small_rc(datadir, num_samples=99))
        with pytest.raises(ValidationError):
            run_selection(small_rc(datadir, num_samples=0))

    def test_input_size_mismatch_rejected(self, datadir):
        with pytest.raises(ValidationError):
            run_selection(small_rc(datadir, input_size=(32, 32)))

    def test_constant_images_surface_in_report_warnings(self, tmp_path, rng):
        for i in range(3):
            write_xtrt(tmp_path / f"img{i}.xtrt", rng.standard_normal((1, 16, 16)))
        write_xtrt(tmp_path / "flat.xtrt", np.full((1, 16, 16), 2.5))
        out = tmp_path / "r.json"
        report, _ = run_selection(small_rc(tmp_path, num_samples=4, out_path=out))
        assert any("flat.xtrt" in w for w in report.warnings)
        payload = json.loads(out.read_text())
        assert any("flat.xtrt" in w for w in payload["warnings"])


class TestEmission:
    def test_report_schema(self, datadir, tmp_path):
        out = tmp_path / "report.json"
        report, curve = run_selection(small_rc(datadir, out_path=out))
        payload = json.loads(out.read_text())
        assert set(payload) == REPORT_KEYS
        assert len(payload["family"]) == 5
        for entry in payload["family"]:
            assert set(entry) == FAMILY_ENTRY_KEYS
        assert set(payload["selected"]) == FAMILY_ENTRY_KEYS - {"s_raw", "s_norm"}
        assert len(payload["variations"]) == 4
        assert [o["k"] for o in payload["objective"]] == list(report.candidates)
        assert payload["k_star"] == report.k_star

    def test_report_round_trip(self, datadir, tmp_path):
        out = tmp_path / "report.json"
        report, curve = run_selection(small_rc(datadir, out_path=out))
        payload = json.loads(out.read_text())
        rebuilt = SensitivityCurve.from_raw([e["s_raw"] for e in payload["family"]])
        redetect = detect_collapse(rebuilt, payload["mode"], payload["tie_break"])
        assert redetect.k_star == payload["k_star"] == report.k_star
        np.testing.assert_allclose(
            [e["s_norm"] for e in payload["family"]], rebuilt.normalized, atol=1e-12)

    def test_csv_layout(self, datadir, tmp_path):
        csv = tmp_path / "curve.csv"
        report, curve = run_selection(small_rc(datadir, csv_path=csv))
        lines = csv.read_text().strip().split("\n")
        assert lines[0] == "cap_index,cap,param_count,S_raw,S_norm,d"
        assert len(lines) - 1 == 5
        assert lines[-1].endswith(",")  # no variation on the last row
        norms = [float(line.split(",")[4]) for line in lines[1:]]
        assert min(norms) == 0.0 and max(norms) == 1.0

    def test_payload_requires_full_report(self):
        curve = SensitivityCurve.from_raw([1.0, 2.0, 3.0, 4.0])
        bare = detect_collapse(curve)
        with pytest.raises(ValidationError):
            report_payload(bare, curve)

    def test_emit_unwritable_path(self, datadir, tmp_path):
        report, curve = run_selection(small_rc(datadir))
        with pytest.raises(OSError, match="nosuchdir"):
            emit_report(report, curve, tmp_path / "nosuchdir" / "r.json")
        with pytest.raises(OSError):
            emit_curve_csv(curve, report.family, tmp_path / "nosuchdir" / "c.csv")


class TestSeedPolicy:
    def test_config_seeds_distinct_and_stable(self):
        seeds = [config_seed(7, i) for i in range(10)]
        assert len(set(seeds)) == 10
        assert seeds == [config_seed(7, i) for i in range(10)]

    def test_weights_not_positionally_shared(self):
        fc = FamilyConfig(input_size=(16, 16), base_channels=4, max_channels=8,
                          stages=2, in_channels=1, out_classes=2)
        fam = build_family(fc)
        a = init_network(fam[0], fc, config_seed(0, 0))
        b = init_network(fam[1], fc, config_seed(0, 1))
        wa = a.encoder[0][0].w
        wb = b.encoder[0][0].w
        assert wa.shape == wb.shape  # both 4-wide first stage
        assert not np.array_equal(wa, wb)
