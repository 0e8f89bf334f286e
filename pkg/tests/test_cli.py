import json

import pytest

from paulilab.cli import EXIT_CONFIG, EXIT_OK, main


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main(list(argv) + ["--out", str(out)])
    return code, out


class TestSpectrum:
    def test_writes_csv_and_json(self, tmp_path):
        code, out = run(
            tmp_path, "spectrum", "--weight", "|z1|^2", "--L", "3", "--h", "0.25", "--k", "4"
        )
        assert code == EXIT_OK
        assert (out / "resolved_config.json").exists()
        lines = (out / "spectrum.csv").read_bytes().decode().strip().split("\r\n")
        assert lines[0] == "index,eigenvalue,residual,boundary_mass"
        assert len(lines) == 5
        payload = json.loads((out / "spectrum.json").read_text())
        assert payload["operator"] == "pauli+"
        assert payload["result"]["converged"] is True
        assert payload["result"]["eigenvalues"][0] == pytest.approx(4.0, rel=0.1)

    def test_dump_operator(self, tmp_path):
        mtx = tmp_path / "op.mtx"
        code, out = run(
            tmp_path, "spectrum", "--weight", "|z1|^2", "--L", "2", "--h", "0.5",
            "--k", "2", "--dump-operator", str(mtx),
        )
        assert code == EXIT_OK
        header = mtx.read_text().splitlines()[0]
        assert "hermitian" in header

    def test_resolved_config_echoed_first(self, tmp_path):
        code, out = run(tmp_path, "spectrum", "--weight", "|z1|^2", "--L", "2", "--h", "0.5")
        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["subcommand"] == "spectrum"
        assert resolved["weight"] == "|z1|^2"
        assert resolved["L"] == 2

    @pytest.mark.parametrize("operator", ["pauli-", "dirac", "box00", "box0n"])
    def test_operator_variants(self, tmp_path, operator):
        code, out = run(
            tmp_path, "spectrum", "--weight", "|z1|^2", "--L", "2", "--h", "0.5",
            "--k", "2", "--operator", operator,
        )
        assert code == EXIT_OK
        payload = json.loads((out / "spectrum.json").read_text())
        assert payload["operator"] == operator
        evs = payload["result"]["eigenvalues"]
        if operator == "box0n":
            # quarter of the spin-up operator: lowest level near 1
            assert evs[0] == pytest.approx(1.0, rel=0.15)
        if operator == "dirac":
            # block operator on two copies of the grid, symmetric spectrum:
            # the smallest algebraic eigenvalues are a near-degenerate pair
            assert evs == sorted(evs)
            assert evs[0] < 0 and evs[0] == pytest.approx(evs[1], rel=1e-9)


class TestIdentity:
    def test_all_three_reports(self, tmp_path):
        code, out = run(
            tmp_path, "identity", "--weight", "|z1|^2", "--L", "4", "--h", "0.4"
        )
        assert code == EXIT_OK
        payload = json.loads((out / "identity.json").read_text())
        assert set(payload["reports"]) == {"2.2", "2.3", "dirac-square"}
        for rep in payload["reports"].values():
            assert 1.5 <= rep["observed_order"] <= 2.5
        assert payload["reports"]["dirac-square"]["offdiag_max"] == 0.0

    def test_single_kind(self, tmp_path):
        code, out = run(
            tmp_path, "identity", "--weight", "|z1|^2", "--L", "3", "--h", "0.5",
            "--which", "2.2", "--refinement-levels", "2",
        )
        assert code == EXIT_OK
        payload = json.loads((out / "identity.json").read_text())
        assert list(payload["reports"]) == ["2.2"]


class TestDoubling:
    def test_quadratic_weight_density(self, tmp_path):
        code, out = run(tmp_path, "doubling", "--weight", "|z1|^2")
        assert code == EXIT_OK
        payload = json.loads((out / "doubling.json").read_text())
        rep = payload["report"]
        # density is the constant 4: Lebesgue behavior, ratio 4 everywhere
        assert rep["c_est"] == pytest.approx(4.0, rel=1e-9)
        assert rep["violations_14"] == 0
        assert rep["consistent_15"] is True


class TestCriteria:
    def test_decoupled_identity_weight(self, tmp_path):
        code, out = run(
            tmp_path, "criteria", "--weight", "|z1|^2 + |z2|^2", "--n", "2"
        )
        assert code == EXIT_OK
        payload = json.loads((out / "criteria.json").read_text())
        assert payload["classification"]["theorem"] == "decoupled-weight doubling criterion"
        assert payload["classification"]["pplus"] == "P+ has no compact inverse"
        assert payload["verdicts"]["2.1"] == "fails (witness found)"

    def test_dirac_verdict_present_for_n1(self, tmp_path):
        code, out = run(tmp_path, "criteria", "--weight", "|z1|^4")
        payload = json.loads((out / "criteria.json").read_text())
        assert payload["dirac_verdict"] == "Dirac operator has no compact resolvent"
        assert payload["verdicts"]["2.1"] == "holds (numerically)"


class TestProxy:
    def test_quartic_stabilizes(self, tmp_path):
        code, out = run(
            tmp_path, "proxy", "--weight", "|z1|^4", "--h", "0.2",
            "--L-values", "2.5", "3", "3.5", "--lam", "20",
        )
        assert code == EXIT_OK
        payload = json.loads((out / "proxy.json").read_text())
        assert payload["verdict_pplus"] == "gap stable, spectrum discrete (proxy)"
        csv_lines = (out / "proxy.csv").read_bytes().decode().strip().split("\r\n")
        assert csv_lines[0].startswith("L,pminus_zero_count")
        assert len(csv_lines) == 4


class TestConfigHandling:
    def test_toml_config_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            'weight = "|z1|^2"\nL = 2.0\nh = 0.5\n\n[spectrum]\nk = 3\n'
        )
        code, out = run(tmp_path, "spectrum", "--config", str(cfg), "--L", "2.5")
        assert code == EXIT_OK
        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["L"] == 2.5  # flag wins over config
        assert resolved["k"] == 3  # config wins over default

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text("bogus_key = 1\n")
        code, _ = run(tmp_path, "spectrum", "--config", str(cfg))
        assert code == EXIT_CONFIG

    def test_bad_weight_expression(self, tmp_path):
        code, _ = run(tmp_path, "spectrum", "--weight", "x1 + $")
        assert code == EXIT_CONFIG

    def test_non_psh_weight(self, tmp_path):
        code, _ = run(tmp_path, "spectrum", "--weight=-|z1|^2", "--L", "2", "--h", "0.5")
        assert code == EXIT_CONFIG

    def test_grid_cap(self, tmp_path):
        code, _ = run(
            tmp_path, "criteria", "--weight", "|z1|^2 + |z2|^2"
        )
        assert code == EXIT_OK  # criteria does not build grids
        code, _ = run(
            tmp_path, "spectrum", "--weight", "|z1|^2 + |z2|^2", "--L", "8", "--h", "0.1"
        )
        assert code == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        code, _ = run(tmp_path, "spectrum", "--config", str(tmp_path / "none.toml"))
        assert code == EXIT_CONFIG


class TestDeterminism:
    def test_identity_reports_byte_identical(self, tmp_path):
        _, out1 = run(
            tmp_path / "a", "identity", "--weight", "|z1|^2", "--L", "3", "--h", "0.5",
            "--which", "2.2",
        )
        _, out2 = run(
            tmp_path / "b", "identity", "--weight", "|z1|^2", "--L", "3", "--h", "0.5",
            "--which", "2.2",
        )
        assert (out1 / "identity.json").read_bytes() == (out2 / "identity.json").read_bytes()

    def test_spectrum_byte_identical(self, tmp_path):
        args = ["spectrum", "--weight", "|z1|^2", "--L", "3", "--h", "0.25", "--k", "4"]
        _, out1 = run(tmp_path / "a", *args)
        _, out2 = run(tmp_path / "b", *args)
        assert (out1 / "spectrum.csv").read_bytes() == (out2 / "spectrum.csv").read_bytes()
        assert (out1 / "spectrum.json").read_bytes() == (out2 / "spectrum.json").read_bytes()
