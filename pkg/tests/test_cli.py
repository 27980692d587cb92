import csv
import io
import json

import numpy as np
import pytest

from sepcert.cli import main
from sepcert.hermitian import save_matrix
from sepcert.states import bell_state


def run_cli(args):
    return main(args)


class TestExitCodes:
    def test_bad_state_spec_is_config_error(self, capsys):
        assert run_cli(["certify", "--state", "nosuch:2x2"]) == 2

    def test_missing_file_is_config_error(self):
        assert run_cli(["certify", "--state", "file:/does/not/exist.json"]) == 2

    def test_non_square_file_is_config_error(self, tmp_path):
        bad = tmp_path / "rho.json"
        bad.write_text(json.dumps({"dims": [2], "re": [[1, 0, 0], [0, 1, 0]],
                                   "im": [[0, 0, 0], [0, 0, 0]]}))
        assert run_cli(["certify", "--state", f"file:{bad}"]) == 2

    def test_bad_class_is_config_error(self):
        assert run_cli(["certify", "--state", "bell", "--class", "nope"]) == 2

    def test_unknown_command_is_config_error(self, capsys):
        assert run_cli(["frobnicate"]) == 2


class TestCertify:
    def test_bell_report(self, tmp_path):
        out = tmp_path / "rep.json"
        code = run_cli(["certify", "--state", "bell", "--class", "sep",
                        "--vertices", "100", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["chi_lower_bound"] == pytest.approx(1 / 3, abs=1e-3)
        assert doc["verdict"] == "entangled"
        assert doc["seed"] == 0
        assert doc["chi_capped"] <= 1.0

    def test_separable_file_state(self, tmp_path):
        rho = tmp_path / "rho.json"
        from sepcert.hermitian import PartitionedState
        mat = np.kron(np.diag([0.3, 0.7]), np.diag([0.5, 0.5]))
        save_matrix(rho, PartitionedState(mat, (2, 2)))
        out = tmp_path / "rep.json"
        code = run_cli(["certify", "--state", f"file:{rho}", "--vertices", "60",
                        "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "member"
        assert doc["chi_lower_bound"] >= 1.0

    def test_ghz_fsep_small(self, tmp_path):
        out = tmp_path / "rep.json"
        code = run_cli(["certify", "--state", "ghz:3x2", "--class", "fsep",
                        "--vertices", "150", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["chi_lower_bound"] == pytest.approx(0.2, abs=0.004)

    def test_decomposition_embedding(self, tmp_path):
        out = tmp_path / "rep.json"
        run_cli(["certify", "--state", "bell", "--vertices", "40",
                 "--include-decomposition", "--out", str(out)])
        doc = json.loads(out.read_text())
        assert "decomposition" in doc
        first = doc["decomposition"]["vertices"][0]
        assert set(first) == {"dims", "re", "im"}

    def test_save_polytope(self, tmp_path):
        poly_path = tmp_path / "poly.json"
        run_cli(["certify", "--state", "bell", "--vertices", "40",
                 "--save-polytope", str(poly_path), "--out", str(tmp_path / "r.json")])
        from sepcert.polytopes import load_polytope
        p = load_polytope(poly_path)
        assert len(p) == 40


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return comments, rows[0], rows[1:]


class TestSweep:
    def test_small_isotropic_sweep(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(["sweep", "--family", "isotropic:2", "--param", "t",
                        "--grid", "1,1", "--vertices", "60", "--no-outer",
                        "--out", str(out)])
        assert code == 0
        comments, header, rows = read_csv(out)
        assert comments[0].startswith("# seed=")
        assert header[:3] == ["t", "chi_lower_bound", "ppt_upper_bound"]
        assert len(rows) == 2
        chi = float(rows[0][1])
        assert chi == pytest.approx(1 / 3, abs=1e-3)

    def test_nine_significant_digits(self, tmp_path):
        out = tmp_path / "sweep.csv"
        run_cli(["sweep", "--family", "isotropic:2", "--param", "t",
                 "--grid", "1,1", "--vertices", "40", "--no-outer", "--out", str(out)])
        _, _, rows = read_csv(out)
        val = rows[0][1]
        digits = val.replace(".", "").replace("-", "").lstrip("0")
        assert len(digits) >= 8  # printed via %.9g

    def test_grid_parsing_colon_form(self, tmp_path):
        out = tmp_path / "s.csv"
        code = run_cli(["sweep", "--family", "werner:2", "--param", "t",
                        "--grid", "1:1:1", "--vertices", "40", "--no-outer",
                        "--out", str(out)])
        assert code == 0


class TestCrossSection:
    def test_origin_is_member_of_everything(self, tmp_path):
        out = tmp_path / "cs.csv"
        code = run_cli(["cross-section", "--state1", "bell", "--state2",
                        "maximally_mixed:2x2", "--resolution", "3",
                        "--xrange", "0:1", "--yrange", "0:1",
                        "--vertices", "60", "--out", str(out)])
        assert code == 0
        comments, header, rows = read_csv(out)
        assert header[:3] == ["x", "y", "psd"]
        origin = [r for r in rows if float(r[0]) == 0.0 and float(r[1]) == 0.0][0]
        assert origin[2] == "1"            # PSD
        assert origin[3] == "1"            # PPT
        assert origin[-1] == "1"           # member of SEP

    def test_inner_flags_never_exceed_ppt(self, tmp_path):
        out = tmp_path / "cs.csv"
        run_cli(["cross-section", "--state1", "bell", "--state2",
                 "maximally_mixed:2x2", "--resolution", "5",
                 "--xrange", "0:1.1", "--yrange", "0:0.5",
                 "--vertices", "80", "--out", str(out)])
        _, header, rows = read_csv(out)
        ppt_col = header.index("ppt_0")
        mem_col = len(header) - 1
        for r in rows:
            assert int(r[mem_col]) <= int(r[ppt_col])

    def test_mismatched_anchors_rejected(self):
        assert run_cli(["cross-section", "--state1", "bell",
                        "--state2", "ghz:3x2", "--resolution", "2"]) == 2


class TestRobustnessCommand:
    def test_random_kind(self, tmp_path):
        out = tmp_path / "rob.json"
        code = run_cli(["robustness", "--kind", "random", "--state", "bell",
                        "--vertices", "80", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["robustness_upper_bound"] == pytest.approx(2.0, abs=0.02)

    def test_generalized_kind(self, tmp_path):
        out = tmp_path / "rob.json"
        code = run_cli(["robustness", "--kind", "generalized", "--state", "bell",
                        "--vertices", "80", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["robustness_upper_bound"] == pytest.approx(1.0, abs=0.02)


class TestWitnessCommand:
    def test_bell_witness(self, tmp_path):
        out = tmp_path / "wit.json"
        code = run_cli(["witness", "--state", "bell", "--vertices", "100",
                        "--verify-products", "200", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["vertex_constraints_ok"] is True
        assert doc["min_over_random_products"] >= -1e-6
        assert doc["witness_value_on_state"] < 0
        assert set(doc["witness"]) == {"dims", "re", "im"}


class TestGammaScanCommand:
    def test_tiny_scan_schema(self, tmp_path):
        out = tmp_path / "scan.csv"
        code = run_cli(["gamma-scan", "--points", "4", "--vertices", "100",
                        "--out", str(out)])
        assert code == 0
        comments, header, rows = read_csv(out)
        assert header == ["theta", "chi_fsep", "bloch_pair_distance_spread",
                          "han_residual", "tetrahedron_volume"]
        assert len(rows) == 4
