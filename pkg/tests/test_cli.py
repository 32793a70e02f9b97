import json

import pytest

from polyavg import cli


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


MODEL2 = {"curve": [[0, 1], [0, 0, 1]], "window": [-1, 1], "budget": 400, "verify": {"suite_configs": 3, "cells": 2}}


class TestConfig:
    def test_validation(self):
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict({"curve": [[0, 1]]})
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict({"curve": [[0, 1], [0, 0, 1]], "window": [0, float("inf")]})
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict({"curve": [[0, 1], [0] * 17 + [1]]})
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict({"curve": [[0, 1], [0, 0, 1]], "seed": 2**64})
        with pytest.raises(cli.ConfigError):
            cli.RunConfig.from_dict({"curve": [[0, 1], [0, 0, 1]], "dimension": 3})

    def test_hash_stable(self):
        a = cli.RunConfig.from_dict(MODEL2)
        b = cli.RunConfig.from_dict(json.loads(json.dumps(MODEL2)))
        assert a.hash() == b.hash() and len(a.hash()) == 16
        assert a.hash() != cli.RunConfig.from_dict({**MODEL2, "seed": 1}).hash()


class TestDecompose:
    def test_model(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["decompose", "--config", write(tmp_path, MODEL2), "--out", str(out)]) == 0
        doc = json.loads((out / "decomposition.json").read_text())
        assert len(doc["intervals"]) == 1 and doc["config_hash"]

    def test_degenerate(self, tmp_path):
        cfg = write(tmp_path, {"curve": [[0, 1], [0, 2]]})
        assert cli.main(["decompose", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_malformed(self, tmp_path, capsys):
        assert cli.main(["decompose", "--config", write(tmp_path, "{not json"), "--out", str(tmp_path)]) == 1
        assert "malformed JSON" in capsys.readouterr().err

    def test_missing_config_flag(self):
        assert cli.main(["decompose"]) == 1


class TestVerify:
    def test_model2(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["verify", "--config", write(tmp_path, MODEL2), "--out", str(out)]) == 0
        doc = json.loads((out / "verify.json").read_text())
        assert doc["passed"] and doc["combinat"]["refine"]["checks"]["nonempty"]
        assert (out / "geom.csv").read_text().startswith("# config_hash: ")

    def test_model3(self, tmp_path):
        cfg = {"curve": [[0, 1], [0, 0, 1], [0, 0, 0, 1]], "window": [-1, 1], "budget": 400,
               "verify": {"suite_configs": 2, "cells": 2}}
        assert cli.main(["verify", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0

    def test_seed_override(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["verify", "--config", write(tmp_path, MODEL2), "--out", str(out), "--seed", "7", "--budget", "300"]) == 0
        assert json.loads((out / "verify.json").read_text())["intervals"][0]["geom"]["samples"] >= 300


class TestExperiment:
    def test_hull(self, tmp_path):
        out = tmp_path / "o"
        cfg = write(tmp_path, {"curve": [[0, 1], [0, 0, 1], [0, 0, 0, 1]]})
        assert cli.main(["experiment", "--config", cfg, "--experiment", "hull", "--out", str(out)]) == 0
        lines = (out / "hull_d3.csv").read_text().splitlines()
        assert lines[0].startswith("# config_hash: ")
        assert lines[3] == "A,1/2,1/3"
        assert lines[4] == "B,2/3,1/2"

    def test_sharpness_files(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["experiment", "--config", write(tmp_path, MODEL2), "--experiment", "sharpness", "--out", str(out)]) == 0
        doc = json.loads((out / "sharpness_d2_r3.json").read_text())
        assert doc["fits"]["lower_closed_form"]["slope"] == pytest.approx(-2 + 1 / 3, rel=0.05)
        assert (out / "sharpness_d2_r1.5.dat").exists() and (out / "sharpness_d2_rinf.csv").exists()

    def test_unknown(self, tmp_path):
        assert cli.main(["experiment", "--config", write(tmp_path, MODEL2), "--experiment", "nope", "--out", str(tmp_path)]) == 1

    def test_byte_identical(self, tmp_path):
        cfg = write(tmp_path, {**MODEL2, "experiment": {"deltas": [0.5, 0.25, 0.125, 0.0625]}})
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert cli.main(["experiment", "--config", cfg, "--experiment", "scaling", "--out", str(out)]) == 0
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert blobs[0] == blobs[1] and len(blobs[0]) == 3
        for name, blob in blobs[0].items():
            text = blob.decode()
            assert text.startswith("# config_hash: ") or json.loads(text)["config_hash"]
