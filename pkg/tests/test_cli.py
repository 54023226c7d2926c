from __future__ import annotations

import csv
import io
import json
import math

import pytest

from martingale_range import cli, suites
from martingale_range.lorentz_range import psi_closed_form_power
from martingale_range.witness_verifier import VerificationReport


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def manifest(path):
    d = json.loads(path.read_text())
    d.pop("wall_time")
    return d


class TestVerify:
    def test_empty_suite_rejected(self, capsys):
        assert run(["verify", "--suite", "weak-type", "--cases", "0"], capsys)[0] == 2

    @pytest.mark.parametrize("argv", [
        ["verify", "--suite", "nope"],
        ["verify", "--format", "xml"],
        ["verify", "--depth", "0"],
        ["bogus"],
        [],
    ])
    def test_input_errors(self, argv, capsys):
        assert run(argv, capsys)[0] == 2

    def test_main_theorem_passes(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, _, err = run(["verify", "--suite", "main-theorem", "--cases", "4", "--depth", "40",
                            "--grid-depth", "20", "--seed", "7", "--out", str(out)], capsys)
        assert code == 0 and "4/4" in err
        d = json.loads(out.read_text())
        assert d["schema"] == 1 and d["rng"] == suites.RNG_ALGORITHM
        assert d["counts"]["main-theorem"] == {"cases": 4, "passed": 4, "failed": 0}
        assert d["config"]["seed"] == 7 and "version" in d and "wall_time" in d

    def test_deterministic_and_job_independent(self, tmp_path, capsys):
        args = ["verify", "--suite", "upper-bounds,duality,weak-type", "--cases", "6", "--seed", "3"]
        a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
        run(args + ["--out", str(a)], capsys)
        run(args + ["--out", str(b)], capsys)
        run(args + ["--jobs", "2", "--out", str(c)], capsys)
        assert manifest(a) == manifest(b) == manifest(c)
        strip = lambda p: "\n".join(l for l in p.read_text().splitlines() if "wall_time" not in l)
        assert strip(a) == strip(b)

    def test_seed_changes_stream(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        base = ["verify", "--suite", "empirical-constant", "--cases", "3"]
        run(base + ["--seed", "1", "--out", str(a)], capsys)
        run(base + ["--seed", "2", "--out", str(b)], capsys)
        assert manifest(a)["suites"] != manifest(b)["suites"]

    def test_narrow_small(self, tmp_path, capsys):
        out = tmp_path / "n.json"
        code, _, _ = run(["verify", "--suite", "narrow", "--max-level", "4", "--out", str(out)], capsys)
        assert code == 0
        assert json.loads(out.read_text())["counts"]["narrow"]["cases"] == 31

    def test_csv(self, capsys):
        code, out, _ = run(["verify", "--suite", "duality", "--cases", "2", "--format", "csv"], capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and rows[0] == ["suite", "case", "claim", "status"] and len(rows) == 3

    def test_violation_exit_code(self, monkeypatch, tmp_path, capsys):
        bad = lambda rng, i, s: [VerificationReport("fake", "fail" if i == 1 else "pass", {"i": i})]
        monkeypatch.setitem(suites.SUITES, "duality", suites.Suite("duality", bad, 3))
        out = tmp_path / "v.json"
        code, _, _ = run(["verify", "--suite", "duality", "--out", str(out)], capsys)
        d = json.loads(out.read_text())["suites"]["duality"]
        assert code == 1 and d["failed"] == 1 and d["violations"][0]["witness"] == {"i": 1}

    def test_exception_is_not_a_pass(self, monkeypatch, tmp_path, capsys):
        def boom(rng, i, s):
            raise RuntimeError("kaput")

        monkeypatch.setitem(suites.SUITES, "duality", suites.Suite("duality", boom, 2))
        out = tmp_path / "e.json"
        code, _, _ = run(["verify", "--suite", "duality", "--out", str(out)], capsys)
        d = json.loads(out.read_text())["suites"]["duality"]
        assert code == 1 and d["passed"] == 0
        assert d["violations"][0]["status"] == "error"

    def test_fuzz_uses_random_suites(self, tmp_path, capsys):
        out = tmp_path / "f.json"
        code, _, _ = run(["fuzz", "--cases", "1", "--max-level", "3", "--out", str(out)], capsys)
        d = json.loads(out.read_text())
        assert code == 0 and set(d["counts"]) == set(suites.RANDOM_SUITES)


class TestWitness:
    def write(self, tmp_path, values, res):
        p = tmp_path / "x.json"
        p.write_text(json.dumps({"resolution": res, "values": values}))
        return p

    def test_f1_and_smu(self, tmp_path, capsys):
        p = self.write(tmp_path, ["1/1"], 0)
        outdir = tmp_path / "w"
        code, _, _ = run(["witness", "--input", str(p), "--emit", "f1,Smu", "--depth", "6",
                          "--out", str(outdir)], capsys)
        assert code == 0
        f1 = json.loads((outdir / "f1.json").read_text())["data"]
        vals = [b["values"] if "values" in b else b["levels"] for b in f1["bands"]]
        assert [v[0] for v in vals] == ["1/1", "-2/1"] * 3
        smu = json.loads((outdir / "Smu.json").read_text())["data"]
        assert len(smu) == 1
        piece = smu[0]
        assert piece["beta"] == "0/1" and piece["gamma"] == "1/1"
        assert piece["alpha"] in ("1/1", {"a": "1/1", "b": "0/1"})

    def test_zero_f(self, tmp_path, capsys):
        from martingale_range.dyadic_step import TailedDyadicStep

        p = self.write(tmp_path, ["0/1", "0/1"], 1)
        code, out, _ = run(["witness", "--input", str(p), "--emit", "f"], capsys)
        f = TailedDyadicStep.from_json(json.loads(out)["f"])
        assert code == 0 and f == TailedDyadicStep.constant(0)

    def test_parse_failures(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["witness", "--input", str(bad)], capsys)[0] == 2
        short = self.write(tmp_path, ["1/1"], 2)
        assert run(["witness", "--input", str(short)], capsys)[0] == 2
        assert run(["witness", "--input", str(tmp_path / "missing.json")], capsys)[0] == 2
        ok = self.write(tmp_path, ["1/1"], 0)
        assert run(["witness", "--input", str(ok), "--emit", "g"], capsys)[0] == 2


class TestLorentz:
    def test_psi_table(self, capsys):
        code, out, _ = run(["lorentz", "--gauge", "pow:0.5", "--action", "psi",
                            "--grid", "2^-1..2^-20"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 20
        for r in rows:
            u = float(r["u"])
            assert float(r["psi"]) == pytest.approx(psi_closed_form_power(0.5, u), rel=1e-6)

    def test_criterion_identity(self, capsys):
        code, out, _ = run(["lorentz", "--gauge", "id", "--action", "criterion", "--format", "json"], capsys)
        d = json.loads(out)
        assert code == 0 and d["trend"] == "diverging"
        assert set(d["rows"][0]) == {"u", "psi", "criterion_ratio"}

    def test_norm(self, tmp_path, capsys):
        p = tmp_path / "x.json"
        p.write_text(json.dumps({"resolution": 2, "values": ["1/1", "0/1", "0/1", "0/1"]}))
        code, out, _ = run(["lorentz", "--gauge", "pow:0.5", "--action", "norm", "--input", str(p),
                            "--format", "json"], capsys)
        assert code == 0 and json.loads(out)["rows"][0]["norm"] == pytest.approx(0.5)

    def test_membership(self, tmp_path, capsys):
        x, y = tmp_path / "x.json", tmp_path / "y.json"
        x.write_text(json.dumps({"resolution": 1, "values": ["0/1", "2/1"]}))
        y.write_text(json.dumps({"resolution": 0, "values": ["1/1"]}))
        code, out, _ = run(["lorentz", "--gauge", "id", "--action", "membership", "--input", str(x),
                            "--y", str(y), "--format", "json"], capsys)
        d = json.loads(out)
        assert code == 0 and d["rows"][0]["member"] is False
        assert d["witness"][0] == pytest.approx(1 / math.e)

    @pytest.mark.parametrize("argv", [
        ["lorentz", "--gauge", "exp:1", "--action", "psi"],
        ["lorentz", "--gauge", "id", "--action", "psi", "--grid", "2^-1..x"],
        ["lorentz", "--gauge", "id", "--action", "psi", "--grid", "1.5"],
        ["lorentz", "--gauge", "id", "--action", "norm"],
    ])
    def test_errors(self, argv, capsys):
        assert run(argv, capsys)[0] == 2
