"""Tests for the batch front door.

Exit codes are the contract: 0 clean, 1 input error, 2 invariant
violation.  Runs are deterministic, so verify is exercised against
logs the run command itself wrote, then against hand-corrupted and
truncated copies of them.
"""

import json
import os
import tempfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitstage.cli import (
    EXIT_CLEAN,
    EXIT_INPUT,
    EXIT_INVARIANT,
    RUNNERS,
    RunConfig,
    load_script,
    main,
    run_construction,
)
from limitstage.finitestructs import InvariantError, ScriptError

DIM1_SPEC = {"kind": "pi2", "limit": 1, "ones": [0, 1, 2, 3, 4, 5, 6, 7]}


def field_table(q: int) -> dict:
    """Serialized addition/multiplication table of the size-q prime field."""
    return {
        "signature": [["add", 3], ["mul", 3]],
        "size": q,
        "relations": {
            "add": [[a, b, (a + b) % q] for a in range(q) for b in range(q)],
            "mul": [[a, b, (a * b) % q] for a in range(q) for b in range(q)],
        },
    }


def write_json(path, obj) -> str:
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def run_dim1(tmp_path, name="run.json"):
    """A settled rank-1 run through the command line; returns the log path."""
    out = tmp_path / name
    code = main(
        [
            "run",
            "--construction",
            "qvector.dim1_pi2",
            "--script",
            json.dumps(DIM1_SPEC),
            "--horizon",
            "8",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_CLEAN
    return out


class TestRunConfig:
    """Config objects are strict about their shape."""

    def test_minimal_roundtrip(self):
        config = RunConfig.from_obj({"construction": "finite.pi1_empty", "script": {"kind": "pi1", "limit": 1}})
        assert config.construction == "finite.pi1_empty"
        assert config.params == {}
        assert config.horizon is None

    def test_all_fields(self):
        config = RunConfig.from_obj(
            {
                "construction": "pgroups.tail_pi2",
                "script": "script.json",
                "params": {"p": 2, "level": 1},
                "horizon": 8,
                "out": "log.json",
                "seed": 17,
            }
        )
        assert config.script == "script.json"
        assert config.seed == 17

    def test_unknown_key_rejected(self):
        with pytest.raises(ScriptError, match="unknown config keys: horizons"):
            RunConfig.from_obj({"construction": "a.b", "script": {}, "horizons": 8})

    def test_missing_construction(self):
        with pytest.raises(ScriptError, match="construction id"):
            RunConfig.from_obj({"script": {}})

    def test_missing_script(self):
        with pytest.raises(ScriptError, match="needs a script"):
            RunConfig.from_obj({"construction": "a.b"})

    def test_bad_params_type(self):
        with pytest.raises(ScriptError, match="params must be an object"):
            RunConfig.from_obj({"construction": "a.b", "script": {}, "params": [1]})

    def test_bad_horizon(self):
        with pytest.raises(ScriptError, match="horizon"):
            RunConfig.from_obj({"construction": "a.b", "script": {}, "horizon": -1})


class TestLoadScript:
    """Scripts arrive as tables, generator specs, or paths to either."""

    def test_generator_spec_takes_config_horizon(self):
        script = load_script({"kind": "pi1", "limit": 1}, 6)
        assert script.horizon == 6
        assert script.table == (1,) * 6

    def test_literal_table(self):
        obj = {
            "kind": "pi1",
            "horizon": 3,
            "declared_limit": 0,
            "settle_stage": 1,
            "table": [1, 0, 0],
        }
        script = load_script(obj, 3)
        assert script.settle_stage == 1

    def test_table_horizon_conflict(self):
        obj = {
            "kind": "pi1",
            "horizon": 3,
            "declared_limit": 0,
            "settle_stage": 1,
            "table": [1, 0, 0],
        }
        with pytest.raises(ScriptError, match="disagrees with the script table"):
            load_script(obj, 5)

    def test_invalid_table_surfaces_validator_output(self):
        obj = {
            "kind": "pi1",
            "horizon": 2,
            "declared_limit": 0,
            "settle_stage": 0,
            "table": [0, 1],
        }
        with pytest.raises(ScriptError, match="pi1 table not antitone at stage 1"):
            load_script(obj, None)

    def test_path_source(self, tmp_path):
        path = write_json(tmp_path / "s.json", {"kind": "pi1", "limit": 1, "horizon": 4})
        script = load_script(path, None)
        assert script.horizon == 4

    def test_non_object_rejected(self):
        with pytest.raises(ScriptError, match="must be a JSON object"):
            load_script([1, 2, 3], None)

    def test_unknown_construction(self):
        script = load_script({"kind": "pi1", "limit": 1}, 4)
        with pytest.raises(ScriptError, match="unknown construction"):
            run_construction("bogus.mode", {}, script)


class TestRunCommand:
    """The run subcommand writes a log and reports the final record."""

    def test_settled_rank_one_run(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        report = capsys.readouterr().out
        assert "dim = 1" in report
        assert "settled = true" in report
        log = json.loads(out.read_text(encoding="utf-8"))
        assert log["construction"] == "qvector.dim1_pi2"
        assert log["final"]["matches_declared"] is True

    def test_log_to_stdout_without_out(self, capsys):
        code = main(
            [
                "run",
                "--construction",
                "finite.pi1_empty",
                "--script",
                json.dumps({"kind": "pi1", "limit": 0, "exit": 2}),
                "--horizon",
                "5",
            ]
        )
        assert code == EXIT_CLEAN
        log = json.loads(capsys.readouterr().out)
        assert log["format"] == "limitstage.run.v1"
        assert log["final"]["case"] == 1

    def test_malformed_script_is_input_error(self, capsys):
        bad = {
            "kind": "pi1",
            "horizon": 5,
            "declared_limit": 0,
            "settle_stage": 2,
            "table": [1, 1],
        }
        code = main(
            ["run", "--construction", "qvector.dim0_pi1", "--script", json.dumps(bad)]
        )
        assert code == EXIT_INPUT
        assert "does not match table length" in capsys.readouterr().err

    def test_injected_invariant_failure_exits_two(self, monkeypatch, capsys):
        def boom(mode, params, script):
            raise InvariantError("injected non-extension pair")

        monkeypatch.setitem(RUNNERS, "qvector", boom)
        code = main(
            [
                "run",
                "--construction",
                "qvector.dim1_pi2",
                "--script",
                json.dumps(DIM1_SPEC),
                "--horizon",
                "8",
            ]
        )
        assert code == EXIT_INVARIANT
        assert "invariant violation" in capsys.readouterr().err

    def test_config_file_drives_run(self, tmp_path, capsys):
        out = tmp_path / "cfg_run.json"
        config = {
            "construction": "ehrenfeucht.cofinal_pi2",
            "script": {"kind": "pi2", "limit": 1, "ones": list(range(6))},
            "horizon": 6,
            "out": str(out),
            "seed": 3,
        }
        path = write_json(tmp_path / "cfg.json", config)
        assert main(["run", "--config", path]) == EXIT_CLEAN
        assert "prime-consistent" in capsys.readouterr().out
        assert out.exists()

    def test_flags_override_config(self, tmp_path, capsys):
        config = {
            "construction": "finite.pi1_empty",
            "script": {"kind": "pi1", "limit": 1},
            "horizon": 4,
        }
        path = write_json(tmp_path / "cfg.json", config)
        out = tmp_path / "override.json"
        code = main(["run", "--config", path, "--horizon", "7", "--out", str(out)])
        assert code == EXIT_CLEAN
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        assert len(log["stages"]) == 7

    def test_params_from_file(self, tmp_path, capsys):
        params = write_json(tmp_path / "p.json", {"p": 2, "level": 1, "base": [3]})
        code = main(
            [
                "run",
                "--construction",
                "pgroups.tail_pi2",
                "--script",
                json.dumps({"kind": "pi2", "limit": 1, "ones": list(range(8))}),
                "--horizon",
                "8",
                "--params",
                params,
            ]
        )
        assert code == EXIT_CLEAN

    def test_missing_script_file(self, capsys):
        code = main(
            ["run", "--construction", "finite.pi1_empty", "--script", "no/such/file.json"]
        )
        assert code == EXIT_INPUT
        assert "cannot read script file" in capsys.readouterr().err


class TestVerifyCommand:
    """Verify replays the log and compares stage by stage."""

    def test_clean_log_reports_identical_verdicts(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        run_report = capsys.readouterr().out
        assert main(["verify", str(out)]) == EXIT_CLEAN
        verify_report = capsys.readouterr().out
        assert "clean: all 8 stages replay identically" in verify_report
        for line in run_report.splitlines():
            if line.startswith("  "):
                assert line in verify_report

    def test_corrupted_stage_is_flagged(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        log["stages"][3]["new_atoms"] = []
        bad = write_json(tmp_path / "bad.json", log)
        assert main(["verify", bad]) == EXIT_INVARIANT
        assert "flagged stage 3" in capsys.readouterr().err

    def test_truncated_log_is_unsettled(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        log["stages"] = log["stages"][:5]
        trunc = write_json(tmp_path / "trunc.json", log)
        assert main(["verify", trunc]) == EXIT_CLEAN
        assert "unsettled: log stops at stage 5 of 8" in capsys.readouterr().out

    def test_corrupted_final_is_flagged(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        log["final"]["dim"] = 2
        bad = write_json(tmp_path / "final.json", log)
        assert main(["verify", bad]) == EXIT_INVARIANT
        assert "final report" in capsys.readouterr().err

    def test_extra_stages_are_flagged(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        log["stages"].append(dict(log["stages"][-1]))
        bad = write_json(tmp_path / "extra.json", log)
        assert main(["verify", bad]) == EXIT_INVARIANT
        assert "replay only 8" in capsys.readouterr().err

    def test_missing_keys_is_input_error(self, tmp_path, capsys):
        bad = write_json(tmp_path / "keys.json", {"format": "limitstage.run.v1"})
        assert main(["verify", bad]) == EXIT_INPUT
        assert "lacks keys" in capsys.readouterr().err

    def test_unknown_format_is_input_error(self, tmp_path, capsys):
        out = run_dim1(tmp_path)
        capsys.readouterr()
        log = json.loads(out.read_text(encoding="utf-8"))
        log["format"] = "limitstage.run.v0"
        bad = write_json(tmp_path / "fmt.json", log)
        assert main(["verify", bad]) == EXIT_INPUT
        assert "unknown log format" in capsys.readouterr().err

    def test_unreadable_log_is_input_error(self, tmp_path, capsys):
        path = tmp_path / "garbage.json"
        path.write_text("not json {", encoding="utf-8")
        assert main(["verify", str(path)]) == EXIT_INPUT
        assert "not valid JSON" in capsys.readouterr().err


class TestScottCommand:
    """The scott subcommand renders, classifies, and evaluates."""

    def test_vs_dim_two_class(self, capsys):
        code = main(["scott", "--id", "scott_vs_dim", "--params", '{"k": 2}'])
        assert code == EXIT_CLEAN
        assert "class computable d-Σ₂" in capsys.readouterr().out

    def test_chain_middle_class(self, capsys):
        code = main(["scott", "--id", "scott_ehrenfeucht", "--params", '{"model": "middle"}'])
        assert code == EXIT_CLEAN
        assert "class computable Σ₃" in capsys.readouterr().out

    def test_prime_field_on_own_table(self, tmp_path, capsys):
        struct = write_json(tmp_path / "gf3.json", field_table(3))
        code = main(["scott", "--id", "prime_field", "--params", '{"q": 3}', "--struct", struct])
        assert code == EXIT_CLEAN
        assert "value true" in capsys.readouterr().out

    def test_prime_field_on_wrong_table(self, capsys):
        code = main(
            [
                "scott",
                "--id",
                "prime_field",
                "--params",
                '{"q": 3}',
                "--struct",
                json.dumps(field_table(2)),
            ]
        )
        assert code == EXIT_CLEAN
        assert "value false" in capsys.readouterr().out

    def test_scott_finite_struct_param_revives(self, tmp_path, capsys):
        chain = {
            "signature": [["R", 2]],
            "size": 3,
            "relations": {"R": [[0, 1], [1, 2], [0, 2]]},
        }
        code = main(
            [
                "scott",
                "--id",
                "scott_finite",
                "--params",
                json.dumps({"struct": chain}),
                "--struct",
                json.dumps(chain),
            ]
        )
        assert code == EXIT_CLEAN
        out = capsys.readouterr().out
        assert "class finitary d-Σ₁" in out
        assert "value true" in out

    def test_unknown_catalog_id(self, capsys):
        assert main(["scott", "--id", "nope"]) == EXIT_INPUT
        assert "unknown catalog id" in capsys.readouterr().err

    def test_missing_catalog_param(self, capsys):
        assert main(["scott", "--id", "scott_vs_dim"]) == EXIT_INPUT
        assert "needs parameter" in capsys.readouterr().err

    def test_signature_mismatch_is_input_error(self, capsys):
        chain = {
            "signature": [["R", 2]],
            "size": 2,
            "relations": {"R": [[0, 1]]},
        }
        code = main(
            ["scott", "--id", "prime_field", "--params", '{"q": 3}', "--struct", json.dumps(chain)]
        )
        assert code == EXIT_INPUT
        assert "cannot evaluate" in capsys.readouterr().err

    def test_bad_inline_params(self, capsys):
        assert main(["scott", "--id", "scott_vs_dim", "--params", "{broken"]) == EXIT_INPUT
        assert "not valid JSON" in capsys.readouterr().err


class TestDeterminism:
    """Two executions of one config write the same bytes."""

    def test_repeat_run_bytes(self, tmp_path, capsys):
        first = run_dim1(tmp_path, "a.json")
        second = run_dim1(tmp_path, "b.json")
        capsys.readouterr()
        assert first.read_bytes() == second.read_bytes()

    @settings(max_examples=10, deadline=None)
    @given(limit=st.integers(min_value=0, max_value=1), exit_stage=st.integers(min_value=0, max_value=5))
    def test_run_then_verify_clean(self, limit, exit_stage):
        """Any generated script's log replays identically."""
        spec = {"kind": "pi1", "limit": limit}
        if limit == 0:
            spec["exit"] = exit_stage
        with tempfile.TemporaryDirectory() as scratch:
            out = os.path.join(scratch, "fuzz.json")
            code = main(
                [
                    "run",
                    "--construction",
                    "finite.pi1_empty",
                    "--script",
                    json.dumps(spec),
                    "--horizon",
                    "6",
                    "--out",
                    out,
                ]
            )
            assert code == EXIT_CLEAN
            assert main(["verify", out]) == EXIT_CLEAN
