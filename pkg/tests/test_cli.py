"""End-to-end command-line behavior, driven through main(argv)."""

import hashlib
import json
import math

import pytest

from prefqc import io as fio
from prefqc.cli import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main
from prefqc.cli import _eval_cells
from prefqc.numerics import SolverError


def write_config(path, **cfg):
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True, default=str))
    return str(path)


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tiny_scenario(mu=0.8, m=40, seed=12):
    return {
        "prior": {"type": "two_point", "q1": 0.6, "eta_lo": 0.4, "eta_hi": 0.98},
        "mu": mu,
        "num_users": m,
        "n_range": [20, 30],
        "seed": seed,
        "per_item_p_model": None,
    }


def simulate_into(tmp_path, name="sim", **kw):
    out = tmp_path / name
    config = write_config(
        tmp_path / f"{name}.json", scenario=tiny_scenario(**kw), out_dir=str(out)
    )
    assert main(["simulate", "--config", config]) == EXIT_OK
    return out


class TestSimulate:
    def test_preset_line_count_and_determinism(self, tmp_path, capsys):
        hashes = []
        for name in ("a", "b"):
            out = tmp_path / name
            config = write_config(
                tmp_path / f"{name}.json",
                preset="table3_twopoint_200_50",
                out_dir=str(out),
            )
            assert main(["simulate", "--config", config]) == EXIT_OK
            lines = (out / "annotations.jsonl").read_text().splitlines()
            assert len(lines) == 200 * 50
            hashes.append(
                (sha256(out / "annotations.jsonl"), sha256(out / "truth.csv"))
            )
        assert hashes[0] == hashes[1]
        assert "10000 annotations" in capsys.readouterr().out

    def test_seed_override_lands_in_scenario_json(self, tmp_path):
        out = tmp_path / "sim"
        config = write_config(
            tmp_path / "c.json", scenario=tiny_scenario(seed=0), out_dir=str(out)
        )
        assert main(["simulate", "--config", config, "--seed", "99"]) == EXIT_OK
        assert fio.read_json(out / "scenario.json")["seed"] == 99

    def test_different_seeds_differ(self, tmp_path):
        a = simulate_into(tmp_path, "a", seed=1)
        b = simulate_into(tmp_path, "b", seed=2)
        assert sha256(a / "annotations.jsonl") != sha256(b / "annotations.jsonl")

    def test_preset_and_scenario_are_exclusive(self, tmp_path, capsys):
        config = write_config(
            tmp_path / "c.json",
            preset="twopoint_default",
            scenario=tiny_scenario(),
            out_dir=str(tmp_path / "out"),
        )
        assert main(["simulate", "--config", config]) == EXIT_VALIDATION
        assert "exactly one" in capsys.readouterr().err

    def test_unknown_preset_fails_validation(self, tmp_path):
        config = write_config(
            tmp_path / "c.json", preset="mystery", out_dir=str(tmp_path / "out")
        )
        assert main(["simulate", "--config", config]) == EXIT_VALIDATION

    def test_missing_config_file(self, capsys):
        assert main(["simulate", "--config", "/nonexistent.json"]) == EXIT_VALIDATION
        assert "error:" in capsys.readouterr().err


def fit_config(tmp_path, sim_dir, name="fit", **extra):
    out = tmp_path / name
    cfg = {
        "annotations": str(sim_dir / "annotations.jsonl"),
        "family": "two_point",
        "mu": 0.8,
        "out_dir": str(out),
    }
    cfg.update(extra)
    return write_config(tmp_path / f"{name}.json", **cfg), out


class TestFit:
    def test_outputs_and_rerun_identical(self, tmp_path):
        sim = simulate_into(tmp_path)
        config, out = fit_config(tmp_path, sim)
        assert main(["fit", "--config", config]) == EXIT_OK
        first = sha256(out / "fit.json")
        rows = fio.read_trajectory(out / "trajectory.csv")
        logliks = [r["loglik"] for r in rows]
        assert all(b - a >= -1e-9 for a, b in zip(logliks, logliks[1:]))
        assert main(["fit", "--config", config]) == EXIT_OK
        assert sha256(out / "fit.json") == first

    def test_truth_scenario_adds_delta(self, tmp_path, capsys):
        sim = simulate_into(tmp_path)
        config, out = fit_config(
            tmp_path, sim, truth_scenario=str(sim / "scenario.json")
        )
        assert main(["fit", "--config", config]) == EXIT_OK
        fit = fio.read_fit(out / "fit.json")
        assert 0.0 <= fit["delta"] < 1.5
        assert "delta" in capsys.readouterr().out

    def test_low_mu_flips_labels_and_matches(self, tmp_path):
        sim = simulate_into(tmp_path)
        records = fio.read_annotations(sim / "annotations.jsonl")
        flipped_dir = tmp_path / "flipped"
        flipped_dir.mkdir()
        from prefqc import AnnotationRecord

        fio.write_annotations(
            flipped_dir / "annotations.jsonl",
            [
                AnnotationRecord(r.user_id, r.item_id, 1 - r.label)
                for r in records
            ],
        )
        config_hi, out_hi = fit_config(tmp_path, sim, name="hi", mu=0.8)
        config_lo, out_lo = fit_config(tmp_path, flipped_dir, name="lo", mu=0.2)
        assert main(["fit", "--config", config_hi]) == EXIT_OK
        assert main(["fit", "--config", config_lo]) == EXIT_OK
        hi = fio.read_fit(out_hi / "fit.json")
        lo = fio.read_fit(out_lo / "fit.json")
        assert lo["labels_flipped"] is True and hi["labels_flipped"] is False
        assert lo["params"] == hi["params"]
        assert lo["final_loglik"] == pytest.approx(hi["final_loglik"], abs=1e-9)

    def test_half_mu_rejected(self, tmp_path, capsys):
        sim = simulate_into(tmp_path)
        config, _ = fit_config(tmp_path, sim, mu=0.5)
        assert main(["fit", "--config", config]) == EXIT_VALIDATION
        assert "indistinguishable" in capsys.readouterr().err

    def test_mu_outside_unit_interval_rejected(self, tmp_path):
        sim = simulate_into(tmp_path)
        for bad in (0.0, 1.0, -0.3):
            config, _ = fit_config(tmp_path, sim, name=f"bad{bad}", mu=bad)
            assert main(["fit", "--config", config]) == EXIT_VALIDATION

    def test_empty_annotations_rejected(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        (empty / "annotations.jsonl").write_text("")
        config, _ = fit_config(tmp_path, empty)
        assert main(["fit", "--config", config]) == EXIT_VALIDATION

    def test_missing_required_key(self, tmp_path, capsys):
        config = write_config(
            tmp_path / "c.json", family="beta", mu=0.8, out_dir=str(tmp_path / "o")
        )
        assert main(["fit", "--config", config]) == EXIT_VALIDATION
        assert "annotations" in capsys.readouterr().err

    def test_numeric_failure_exit_code(self, tmp_path, monkeypatch):
        sim = simulate_into(tmp_path)
        config, _ = fit_config(tmp_path, sim)

        def blow_up(*args, **kwargs):
            raise SolverError("solver diverged", 2.0, 3.0, (0.1, 0.2))

        monkeypatch.setattr("prefqc.cli.em_fit", blow_up)
        assert main(["fit", "--config", config]) == EXIT_NUMERIC


def infer_config(tmp_path, sim, fit_out, rule, name="infer", **extra):
    out = tmp_path / name
    cfg = {
        "annotations": str(sim / "annotations.jsonl"),
        "fit": str(fit_out / "fit.json"),
        "rule": rule,
        "out_dir": str(out),
    }
    cfg.update(extra)
    return write_config(tmp_path / f"{name}.json", **cfg), out


class TestInferAndFilter:
    def fitted(self, tmp_path):
        sim = simulate_into(tmp_path)
        config, out = fit_config(tmp_path, sim)
        assert main(["fit", "--config", config]) == EXIT_OK
        return sim, out

    def test_keep_everyone_is_identity(self, tmp_path):
        sim, fit_out = self.fitted(tmp_path)
        config, out = infer_config(
            tmp_path, sim, fit_out, {"type": "top_fraction", "fraction": 1.0}
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        assert sha256(out / "filtered.jsonl") == sha256(sim / "annotations.jsonl")
        records = fio.read_annotations(out / "filtered.jsonl")
        pairs = fio.read_pairs(out / "pairs.jsonl")
        assert len(pairs) == len(records)
        for rec, (item_id, chosen) in zip(records, pairs):
            assert item_id == rec.item_id
            assert chosen == ("A" if rec.label == 1 else "B")

    def test_top_fraction_keeps_ceiling_of_users(self, tmp_path):
        sim, fit_out = self.fitted(tmp_path)
        config, out = infer_config(
            tmp_path, sim, fit_out, {"type": "top_fraction", "fraction": 0.8}
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        decisions = fio.read_decisions(out / "decisions.csv")
        kept = {d.user_id for d in decisions if d.attentive}
        assert len(decisions) == 40
        assert len(kept) == math.ceil(0.8 * 40)
        filtered = fio.read_annotations(out / "filtered.jsonl")
        assert {r.user_id for r in filtered} == kept
        posteriors = fio.read_posteriors(out / "posteriors.csv")
        assert [p["tail_probs"][0][0] for p in posteriors] == [0.5] * 40

    def test_tail_rule_sets_tail_column(self, tmp_path):
        sim, fit_out = self.fitted(tmp_path)
        config, out = infer_config(
            tmp_path,
            sim,
            fit_out,
            {"type": "tail_probability", "eta_star": 0.7, "level": 0.5},
            name="tail",
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        header = (out / "posteriors.csv").read_text().splitlines()[0]
        assert header.endswith("tail_0.7")

    def test_flipped_fit_filters_original_labels(self, tmp_path):
        # Fit on mu below 1/2 flips labels internally; the filtered output
        # must still carry the file's original labels.
        sim = simulate_into(tmp_path)
        records = fio.read_annotations(sim / "annotations.jsonl")
        from prefqc import AnnotationRecord

        flipped_dir = tmp_path / "flipped"
        flipped_dir.mkdir()
        fio.write_annotations(
            flipped_dir / "annotations.jsonl",
            [AnnotationRecord(r.user_id, r.item_id, 1 - r.label) for r in records],
        )
        config, fit_out = fit_config(tmp_path, flipped_dir, name="lofit", mu=0.2)
        assert main(["fit", "--config", config]) == EXIT_OK
        config, out = infer_config(
            tmp_path,
            flipped_dir,
            fit_out,
            {"type": "top_fraction", "fraction": 0.5},
            name="loinfer",
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        filtered = fio.read_annotations(out / "filtered.jsonl")
        originals = {
            (r.user_id, r.item_id): r.label
            for r in fio.read_annotations(flipped_dir / "annotations.jsonl")
        }
        assert filtered and all(
            originals[(r.user_id, r.item_id)] == r.label for r in filtered
        )

    def test_filter_command_replays_decisions(self, tmp_path):
        sim, fit_out = self.fitted(tmp_path)
        config, infer_out = infer_config(
            tmp_path, sim, fit_out, {"type": "top_fraction", "fraction": 0.5}
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        replay_out = tmp_path / "replay"
        config = write_config(
            tmp_path / "replay.json",
            annotations=str(sim / "annotations.jsonl"),
            decisions=str(infer_out / "decisions.csv"),
            out_dir=str(replay_out),
        )
        assert main(["filter", "--config", config]) == EXIT_OK
        assert sha256(replay_out / "filtered.jsonl") == sha256(
            infer_out / "filtered.jsonl"
        )
        assert sha256(replay_out / "pairs.jsonl") == sha256(
            infer_out / "pairs.jsonl"
        )

    def test_filter_with_missing_decision_fails(self, tmp_path):
        sim, fit_out = self.fitted(tmp_path)
        config, infer_out = infer_config(
            tmp_path, sim, fit_out, {"type": "top_fraction", "fraction": 0.5}
        )
        assert main(["infer", "--config", config]) == EXIT_OK
        decisions = fio.read_decisions(infer_out / "decisions.csv")
        fio.write_decisions(infer_out / "decisions.csv", decisions[:-1])
        config = write_config(
            tmp_path / "bad.json",
            annotations=str(sim / "annotations.jsonl"),
            decisions=str(infer_out / "decisions.csv"),
            out_dir=str(tmp_path / "badout"),
        )
        assert main(["filter", "--config", config]) == EXIT_VALIDATION


class TestEstimateMu:
    def test_stdout_json_and_frozen_interval(self, tmp_path, capsys):
        from prefqc import ScoredPair

        scores = tmp_path / "scores.csv"
        pairs = [ScoredPair(f"i{k}", 1.0, 0.0) for k in range(80)]
        pairs += [ScoredPair(f"j{k}", 0.0, 1.0) for k in range(20)]
        fio.write_scored_pairs(scores, pairs)
        out_file = tmp_path / "mu.json"
        config = write_config(
            tmp_path / "c.json", scores=str(scores), out=str(out_file)
        )
        assert main(["estimate-mu", "--config", config]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["mu_hat"] == 0.8
        assert payload["num_pairs"] == 100
        assert payload["ci_low"] == pytest.approx(0.7111708344068411, abs=1e-12)
        assert payload["ci_high"] == pytest.approx(0.8666330666689674, abs=1e-12)
        assert fio.read_json(out_file) == payload

    def test_empty_scores_rejected(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("item_id,score_a,score_b\n")
        config = write_config(tmp_path / "c.json", scores=str(scores))
        assert main(["estimate-mu", "--config", config]) == EXIT_VALIDATION


class TestEval:
    def eval_config(self, tmp_path, seeds, cells=None, workers_cfg=None, **extra):
        out = tmp_path / "eval"
        cfg = {"seeds": seeds, "out_dir": str(out)}
        if cells is not None:
            cfg["cells"] = cells
        cfg.update(extra)
        return write_config(tmp_path / "eval.json", **cfg), out

    def tiny_cell(self, **overrides):
        cell = {
            "cell": "smoke",
            "family": "two_point",
            "scenario": tiny_scenario(m=30),
            "mu_variant": "known",
            "rule": {"type": "top_fraction", "fraction": 0.5},
        }
        cell.update(overrides)
        return cell

    def test_custom_cells_produce_sweep_rows(self, tmp_path):
        config, out = self.eval_config(tmp_path, [0, 1], cells=[self.tiny_cell()])
        assert main(["eval", "--config", config]) == EXIT_OK
        rows = fio.read_sweep(out / "sweep.csv")
        assert len(rows) == 1
        row = rows[0]
        assert row["cell"] == "smoke"
        assert row["seeds_ok"] == "2" and row["seeds_failed"] == "0"
        assert 0.0 <= float(row["delta_mean"]) < 1.5
        assert 0.0 <= float(row["accuracy_mean"]) <= 1.0
        assert row["note"] == ""

    def test_failures_recorded_not_fatal(self, tmp_path):
        bad = self.tiny_cell(cell="broken", mu_variant="bogus")
        config, out = self.eval_config(tmp_path, [0, 1], cells=[bad])
        assert main(["eval", "--config", config]) == EXIT_OK
        row = fio.read_sweep(out / "sweep.csv")[0]
        assert row["seeds_ok"] == "0" and row["seeds_failed"] == "2"
        assert "bogus" in row["note"]

    def test_seeds_must_be_non_empty_list(self, tmp_path):
        for seeds in ([], "0"):
            config, _ = self.eval_config(tmp_path, seeds, cells=[self.tiny_cell()])
            assert main(["eval", "--config", config]) == EXIT_VALIDATION

    def test_needs_cells_or_known_preset(self, tmp_path):
        config, _ = self.eval_config(tmp_path, [0], preset="unknown_sweep")
        assert main(["eval", "--config", config]) == EXIT_VALIDATION

    def test_parallel_workers_match_serial(self, tmp_path, monkeypatch):
        cells = [self.tiny_cell(), self.tiny_cell(cell="second")]
        config, out = self.eval_config(tmp_path, [0], cells=cells)
        assert main(["eval", "--config", config]) == EXIT_OK
        serial = sha256(out / "sweep.csv")
        monkeypatch.setenv("PREFQC_WORKERS", "2")
        assert main(["eval", "--config", config]) == EXIT_OK
        assert sha256(out / "sweep.csv") == serial

    def test_builtin_grids_have_expected_shapes(self):
        table3 = _eval_cells({"preset": "table3_grid"})
        assert len(table3) == 12
        assert {c["family"] for c in table3} == {"two_point", "beta"}
        assert all(c["mu_variant"] == "known" for c in table3)
        mu_effect = _eval_cells({"preset": "mu_effect"})
        assert len(mu_effect) == 16
        assert {c["mu_variant"] for c in mu_effect} == {"known", "beta_prior"}
        mus = {fio.decode_scenario(c["scenario"]).mu for c in mu_effect}
        assert mus == {0.6, 0.7, 0.8, 0.9}


class TestParser:
    def test_unknown_command_exits_via_argparse(self):
        with pytest.raises(SystemExit):
            main(["explode", "--config", "x.json"])

    def test_command_requires_config(self):
        with pytest.raises(SystemExit):
            main(["fit"])
