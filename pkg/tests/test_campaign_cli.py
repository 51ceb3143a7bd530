from __future__ import annotations

import json

import numpy as np
import pytest

from opcalc import campaign, circlefn, cli, shift
from opcalc.campaign import CampaignConfig, run_campaign
from opcalc.linalg import load_matrix, save_matrix

from conftest import rand_contraction, rand_unitary


def small_config(tmp_path, **kw):
    base = dict(trials=3, dims=[1, 2, 3], p_values=[1, 2, "inf"], output_dir=str(tmp_path / "out"),
                function_ids=["z^1", "z^-2", "rand_trig_4", "abs_im_z@J8"], dilation_degree=4,
                shift_degree=8, blowup_function="abs_im_z@J8", blowup_deltas=[0.5, 0.1])
    base.update(kw)
    return CampaignConfig(**base)


class TestConfig:
    def test_defaults_valid(self):
        CampaignConfig().validate()

    @pytest.mark.parametrize("bad", [dict(trials=0), dict(dims=[0]), dict(delta_floor=1.0),
                                     dict(checks=["nope"]), dict(p_values=[0.5]),
                                     dict(function_ids=["abs_im_z"]), dict(dims=[65])])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            CampaignConfig(**bad).validate()

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            CampaignConfig.from_dict({"trails": 3})

    def test_load(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"trials": 7, "checks": ["series"]}))
        cfg = campaign.load_config(tmp_path / "c.json")
        assert cfg.trials == 7 and cfg.checks == ["series"]


class TestRunner:
    def test_empty_checks(self, tmp_path):
        cfg = small_config(tmp_path, checks=[])
        assert run_campaign(cfg) == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["checks"] == {} and summary["failures"] == []
        assert summary["schema_version"] == 1

    def test_single_series_trial(self, tmp_path):
        cfg = small_config(tmp_path, checks=["series"], trials=1, function_ids=["z^1"], p_values=[2])
        assert run_campaign(cfg) == 0
        lines = (tmp_path / "out" / "series.csv").read_bytes().split(b"\r\n")
        assert lines[0] == b"instance_id,p,f_id,lhs,rhs,constant_used,slack,pass"
        assert len([ln for ln in lines[1:] if ln]) == 1
        row = lines[1].decode().split(",")
        assert row[2] == "z^1" and float(row[6]) == 0.0 and row[7] == "true"

    def test_all_checks_pass(self, tmp_path):
        cfg = small_config(tmp_path)
        assert run_campaign(cfg, threads=2) == 0
        out = tmp_path / "out"
        for name in ("series", "strict_pair", "sqrt_lip", "defect", "dilation_diff", "doi_exact",
                     "hs_estimate", "trace_formula", "ratio", "chain", "blowup"):
            assert (out / f"{name}.csv").exists(), name
        assert (out / "blowup.dat").read_text().count("\n") == 2
        summary = json.loads((out / "summary.json").read_text())
        assert summary["checks"]["ratio"]["p2_envelope_exceeded"] == 0
        assert all(v.get("failed", 0) == 0 for v in summary["checks"].values())

    def test_threads_byte_identical(self, tmp_path):
        a = small_config(tmp_path, output_dir=str(tmp_path / "a"))
        b = small_config(tmp_path, output_dir=str(tmp_path / "b"))
        assert run_campaign(a, threads=1) == 0
        assert run_campaign(b, threads=3) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_env_thread_fallback(self, monkeypatch):
        monkeypatch.setenv("OPCALC_THREADS", "3")
        assert campaign._threads(None) == 3
        assert campaign._threads(2) == 2

    def test_failure_writes_bundle(self, tmp_path, monkeypatch):
        # a checker that reports an impossible row must fail the run and leave a bundle
        sample, _ = campaign.REGISTRY["series"]

        def broken(inst, iid):
            return [campaign._row(iid, 2, "z^1", 2.0, 1.0, 1.0)]

        monkeypatch.setitem(campaign.REGISTRY, "series", (sample, broken))
        cfg = small_config(tmp_path, checks=["series"], trials=2)
        assert run_campaign(cfg) == 1
        bundles = sorted((tmp_path / "out" / "repro").glob("*.json"))
        assert len(bundles) == 2
        bundle = json.loads(bundles[0].read_text())
        assert bundle["check"] == "series" and "instance" in bundle and "config" in bundle

    def test_replay_reproduces(self, tmp_path):
        cfg = small_config(tmp_path, checks=["dilation_diff"])
        iid, inst, rows = campaign.run_trial(cfg, "dilation_diff", 1)
        bundle = json.loads(json.dumps(campaign.make_bundle(cfg, "dilation_diff", iid, inst, rows)))
        fresh, dev = campaign.replay_bundle(bundle)
        assert dev <= 1e-12 and len(fresh) == len(rows)

    def test_instance_ids_stable(self):
        assert campaign.instance_id(1, "series", 3) == campaign.instance_id(1, "series", 3)
        assert campaign.instance_id(1, "series", 3).startswith("series-00003-")


class TestCli:
    def test_verify(self, tmp_path, capsys):
        cfg = small_config(tmp_path, checks=["series", "defect"])
        (tmp_path / "c.json").write_text(json.dumps(cfg.__dict__))
        code = cli.main(["verify", "--config", str(tmp_path / "c.json"), "--trials", "2",
                         "--check", "series", "--out", str(tmp_path / "v"), "--seed", "5", "--threads", "2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "PASS series" in out and "defect" not in out
        summary = json.loads((tmp_path / "v" / "summary.json").read_text())
        assert summary["master_seed"] == 5 and summary["trials"] == 2

    def test_replay(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        iid, inst, rows = campaign.run_trial(cfg, "series", 0)
        path = tmp_path / "b.json"
        path.write_text(json.dumps(campaign.make_bundle(cfg, "series", iid, inst, rows)))
        assert cli.main(["replay", str(path)]) == 0
        assert "max relative deviation" in capsys.readouterr().out

    def test_replay_detects_tampering(self, tmp_path):
        cfg = small_config(tmp_path)
        iid, inst, rows = campaign.run_trial(cfg, "series", 0)
        bundle = campaign.make_bundle(cfg, "series", iid, inst, rows)
        bundle["rows"][0] = dict(bundle["rows"][0], lhs=bundle["rows"][0]["lhs"] + 1.0)
        path = tmp_path / "b.json"
        path.write_text(json.dumps(bundle))
        assert cli.main(["replay", str(path)]) == 1

    def test_shift(self, tmp_path, rng):
        save_matrix(tmp_path / "t0.json", rand_contraction(rng, 3, 0.5))
        save_matrix(tmp_path / "t1.json", rand_contraction(rng, 3, 0.7))
        out = tmp_path / "s"
        assert cli.main(["shift", "--t0", str(tmp_path / "t0.json"), "--t1", str(tmp_path / "t1.json"),
                         "-N", "6", "--out", str(out)]) == 0
        eta = shift.load(out / "eta.json")
        assert eta.N == 6 and len(eta.coeffs) == 12
        assert len((out / "eta_re.dat").read_text().splitlines()) == 1024
        assert len((out / "eta_im.dat").read_text().splitlines()) == 1024

    def test_dilate(self, tmp_path, rng, capsys):
        T = rand_contraction(rng, 3, 0.9)
        save_matrix(tmp_path / "t.json", T)
        assert cli.main(["dilate", str(tmp_path / "t.json"), "-N", "5", "--out", str(tmp_path / "u.json")]) == 0
        u = load_matrix(tmp_path / "u.json")
        assert u.shape == (18, 18)
        assert np.allclose(np.linalg.matrix_power(u, 5)[:3, :3], np.linalg.matrix_power(T, 5), atol=1e-9)
        assert "unitarity residual" in capsys.readouterr().out

    def test_dilate_rejects_non_contraction(self, tmp_path):
        save_matrix(tmp_path / "t.json", 2 * np.eye(2))
        assert cli.main(["dilate", str(tmp_path / "t.json")]) == 2

    def test_doi(self, tmp_path, rng):
        U, V = rand_unitary(rng, 4), rand_unitary(rng, 4)
        save_matrix(tmp_path / "u.json", U)
        save_matrix(tmp_path / "v.json", V)
        circlefn.save(tmp_path / "f.json", circlefn.CircleFunction({2: 1.0, -1: 1j}))
        assert cli.main(["doi", "--u", str(tmp_path / "u.json"), "--v", str(tmp_path / "v.json"),
                         "--f", str(tmp_path / "f.json"), "--out", str(tmp_path / "d.json")]) == 0
        D = load_matrix(tmp_path / "d.json")
        ref = U @ U + 1j * U.conj().T - V @ V - 1j * V.conj().T
        assert np.linalg.norm(D - ref) <= 1e-9
        assert cli.main(["doi", "--u", str(tmp_path / "u.json"), "--v", str(tmp_path / "v.json"),
                         "--zoo", "abs_im_z@J16"]) == 0

    def test_module_entry(self):
        import subprocess
        import sys
        res = subprocess.run([sys.executable, "-m", "opcalc", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "verify" in res.stdout
