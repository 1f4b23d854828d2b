import csv
import io
import json
import math

import pytest

from adqkd.cli import (
    COLUMNS,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_ORACLE,
    ConfigError,
    main,
    parse_config,
)
from adqkd.params import ChannelParams, ProtocolParams
from adqkd.skl import secure_key_length

DEG = math.pi / 180


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _base(**extra):
    cfg = {"protocol": {"N": 1e8, "b": 2},
           "channel": {"eta": 1.0, "p_noise": 0.0, "delta_mis": 5 * DEG},
           "optimization": {"enabled": False}}
    cfg.update(extra)
    return cfg


class TestConfig:
    def test_requires_N(self):
        with pytest.raises(ConfigError) as exc:
            parse_config({"protocol": {}})
        assert exc.value.field == "protocol.N"

    def test_unknown_field(self):
        with pytest.raises(ConfigError) as exc:
            parse_config({"protocol": {"N": 1e8, "pz": 0.5}})
        assert exc.value.field == "protocol.pz"
        with pytest.raises(ConfigError):
            parse_config({"protocol": {"N": 1e8}, "colour": "red"})

    def test_field_level_message(self, tmp_path, capsys):
        cfg = _write(tmp_path, {"protocol": {"N": 1e8, "p_z": 1.2}})
        assert main(["skl", "--config", cfg]) == EXIT_CONFIG
        assert "protocol.p_z" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["skl", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_bad_seed(self, tmp_path):
        cfg = _write(tmp_path, _base(seed=-1))
        assert main(["skl", "--config", cfg]) == EXIT_CONFIG


class TestSkl:
    def test_matches_library(self, tmp_path):
        out = str(tmp_path / "o.csv")
        assert main(["skl", "--config", _write(tmp_path, _base()), "--out", out]) == EXIT_OK
        rows = _rows(out)
        assert [r["variant"] for r in rows] == ["bb84", "ad"]
        ch = ChannelParams.from_degrees(1.0, 0.0, 5.0)
        ad = secure_key_length(ProtocolParams(N=1e8, b=2), ch, "ad")
        bb = secure_key_length(ProtocolParams(N=1e8, b=2, q_t=0.0), ch, "bb84")
        assert int(rows[1]["ell"]) == ad.ell > 0
        assert int(rows[0]["ell"]) == bb.ell > 0
        assert float(rows[1]["rate"]) == ad.rate
        assert rows[1]["valid"] == "true" and rows[0]["b"] == ""

    def test_flag_overrides(self, tmp_path):
        out = str(tmp_path / "o.csv")
        cfg = _write(tmp_path, _base())
        assert main(["skl", "--config", cfg, "--variant", "ad", "--b", "4", "--out", out]) == EXIT_OK
        rows = _rows(out)
        assert len(rows) == 1 and rows[0]["b"] == "4"

    def test_high_qber_no_key(self, tmp_path):
        # misalignment giving a 20% key-set error rate leaves no key for any block size
        data = _base(optimization={"enabled": True, "restarts": 1, "budget": 300})
        data["channel"]["delta_mis"] = math.asin(math.sqrt(0.2))
        cfg = _write(tmp_path, data)
        for b in range(1, 11):
            out = str(tmp_path / f"b{b}.csv")
            assert main(["optimize", "--config", cfg, "--b", str(b), "--out", out]) == EXIT_OK
            for r in _rows(out):
                assert float(r["phi_k"]) == pytest.approx(0.2, abs=5e-3)
                assert int(r["ell"]) == 0


class TestSweep:
    def test_empty_range_header_only(self, tmp_path):
        out = tmp_path / "o.csv"
        cfg = _write(tmp_path, _base(sweep={"start": 0.3, "stop": 0.1, "step": 0.01}))
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert out.read_text() == ",".join(COLUMNS) + "\n"

    def test_rows_and_crossing(self, tmp_path):
        out = str(tmp_path / "o.csv")
        svg = tmp_path / "o.svg"
        cfg = _write(tmp_path, _base(sweep={"start": 0.1, "stop": 0.5, "step": 0.1,
                                             "b_values": [1, 2]}))
        assert main(["sweep", "--config", cfg, "--out", out, "--svg", str(svg)]) == EXIT_OK
        rows = _rows(out)
        points = [r for r in rows if r["sweep_var"] == "delta_mis"]
        assert len(points) == 5 * 3
        assert [(r["variant"], r["b"]) for r in points[:3]] == [("bb84", ""), ("ad", "1"), ("ad", "2")]
        crossings = [r for r in rows if r["sweep_var"].startswith("crossing")]
        assert crossings and len(crossings) % 2 == 0
        assert svg.read_text().startswith("<svg")

    def test_byte_deterministic_and_threads(self, tmp_path):
        data = _base(sweep={"start": 0.1, "stop": 0.3, "step": 0.05, "b_values": [2, 3]},
                     optimization={"enabled": True, "restarts": 1, "budget": 80,
                                   "warm_restarts": 0})
        data["sweep"]["tol"] = 0.02
        cfg = _write(tmp_path, data)
        outs = []
        for i, threads in enumerate(("1", "1", "3")):
            out = tmp_path / f"o{i}.csv"
            assert main(["sweep", "--config", cfg, "--seed", "5", "--threads", threads,
                         "--out", str(out)]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_config_round_trip(self, tmp_path):
        cfg = _write(tmp_path, _base(sweep={"start": 0.1, "stop": 0.3, "step": 0.1}))
        emitted = tmp_path / "effective.json"
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", "--config", cfg, "--seed", "3", "--variant", "ad",
                     "--emit-config", str(emitted), "--out", str(a)]) == EXIT_OK
        assert main(["sweep", "--config", str(emitted), "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(emitted.read_text())["seed"] == 3


class TestOracle:
    def test_zero_trials(self):
        assert main(["oracle", "--suite", "bounds", "--trials", "0"]) == EXIT_CONFIG

    def test_pass_writes_report(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["oracle", "--suite", "bounds", "--trials", "3000", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["passed"] and rep["suite"] == "bounds"
        assert all({"name", "observed", "target", "passed"} <= set(c) for c in rep["checks"])

    def test_weakened_bound_fails(self, tmp_path):
        cfg = _write(tmp_path, {"protocol": {"N": 1e8},
                                "oracle": {"suite": "bounds", "trials": 20000, "nu_scale": 0.5}})
        out = tmp_path / "r.json"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_ORACLE
        failed = [c["name"] for c in json.loads(out.read_text())["checks"] if not c["passed"]]
        assert failed and all(n.startswith("serfling") for n in failed)
