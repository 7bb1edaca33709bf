import json

import pytest

from aminegen.cli import (EXIT_DATA, EXIT_OK, EXIT_USAGE, main)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBasics:
    def test_classify_tertiary(self, capsys):
        code, out, _ = run_cli(capsys, "classify", "CN(CCO)CCO")
        assert code == EXIT_OK
        assert out.strip() == "tertiary"

    def test_canonical_equivalence(self, capsys):
        code1, out1, _ = run_cli(capsys, "canonical", "OCCN")
        code2, out2, _ = run_cli(capsys, "canonical", "NCCO")
        assert code1 == code2 == EXIT_OK
        assert out1 == out2

    def test_formula(self, capsys):
        code, out, _ = run_cli(capsys, "formula", "CC(C)(N)CO")
        assert code == EXIT_OK
        assert out.startswith("C4H11NO ")

    def test_fingerprint_output(self, capsys):
        code, out, _ = run_cli(capsys, "fingerprint", "NCCO")
        assert code == EXIT_OK
        hex_part, pop = out.split()
        assert len(hex_part) == 1024 // 4
        assert int(pop) > 0

    def test_bad_smiles_is_data_error(self, capsys):
        code, out, err = run_cli(capsys, "classify", "C(")
        assert code == EXIT_DATA
        assert out == ""
        assert "error" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "--bogus", "classify", "C")
        assert code == EXIT_USAGE

    def test_no_input_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "classify")
        assert code == EXIT_USAGE


class TestModelCommands:
    @pytest.fixture
    def corpus_file(self, tmp_path, amine_corpus):
        path = tmp_path / "corpus.smi"
        path.write_text("# training corpus\n" + "\n".join(amine_corpus[:400]) + "\n")
        return str(path)

    def test_pretrain_sample_metrics(self, capsys, tmp_path, corpus_file):
        model_path = str(tmp_path / "model.bin")
        code, _, err = run_cli(capsys, "pretrain", "--corpus", corpus_file,
                               "--out", model_path, "--order", "4",
                               "--val-fraction", "0.01")
        assert code == EXIT_OK
        assert "perplexity" in err

        code, out, _ = run_cli(capsys, "sample", "--model", model_path,
                               "-n", "25", "--seed", "3")
        assert code == EXIT_OK
        samples = out.strip().splitlines()
        assert len(samples) == 25

        code, out2, _ = run_cli(capsys, "sample", "--model", model_path,
                                "-n", "25", "--seed", "3")
        assert out2 == out  # same seed, same samples

        sample_path = tmp_path / "samples.smi"
        sample_path.write_text("\n".join(samples) + "\n")
        code, out, _ = run_cli(capsys, "metrics", "--samples", str(sample_path),
                               "--training", corpus_file)
        assert code == EXIT_OK
        header = out.splitlines()[0]
        assert header.split(",")[:6] == ["Samples", "Validity", "Uniqueness",
                                         "Novelty", "SEDiv", "Amine"]

    def test_bad_model_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"garbage")
        code, _, err = run_cli(capsys, "sample", "--model", str(bad), "-n", "1")
        assert code == EXIT_DATA


class TestQsprCommands:
    def test_train_and_predict(self, capsys, tmp_path, corpus_molecules):
        from aminegen.molgraph import canonical_smiles

        rows = ["smiles,value"]
        for mol in corpus_molecules[:120]:
            rows.append(f"{canonical_smiles(mol)},{float(mol.n_atoms())}")
        data = tmp_path / "sizes.csv"
        data.write_text("\n".join(rows) + "\n")
        model_path = str(tmp_path / "knn.npz")
        code, out, _ = run_cli(capsys, "qspr-train", "--data", str(data),
                               "--model", "knn", "--grid", "k=1,3",
                               "--out", model_path)
        assert code == EXIT_OK
        assert out.splitlines()[0] == \
            "Task,Model,Train R-squared,Train MAE,Test R-squared,Test MAE"

        code, out, _ = run_cli(capsys, "qspr-predict", "--model", model_path,
                               canonical_smiles(corpus_molecules[5]))
        assert code == EXIT_OK
        float(out.strip())  # parses as a number

    def test_duplicate_rows_are_data_error(self, capsys, tmp_path):
        data = tmp_path / "dup.csv"
        data.write_text("smiles,value\nNCCO,1.0\nOCCN,2.0\n")
        code, _, err = run_cli(capsys, "qspr-train", "--data", str(data),
                               "--model", "ridge")
        assert code == EXIT_DATA


class TestBenchmarkCommand:
    def test_replay_rediscovery(self, capsys, tmp_path):
        from aminegen.benchmark import reference_amines

        targets = [r["smiles"] for r in reference_amines()
                   if r["benchmark"] == "rediscovery"]
        replay = tmp_path / "candidates.smi"
        replay.write_text("\n".join(targets) + "\n")
        tasks = tmp_path / "tasks.txt"
        tasks.write_text("\n".join(
            f"rediscovery;{t};name=t{i}" for i, t in enumerate(targets)) + "\n")
        out_csv = tmp_path / "report.csv"
        code, out, _ = run_cli(capsys, "benchmark", "--candidates", str(replay),
                               "--tasks", str(tasks), "--out", str(out_csv))
        assert code == EXIT_OK
        assert out.splitlines()[-1] == "Total,,,10.000"
        assert out_csv.read_text() == out


class TestRunCommands:
    def test_run_resume_report(self, capsys, tmp_path, amine_corpus):
        from aminegen import ngramgen

        model = ngramgen.train(amine_corpus[:300], order=3)
        model_path = tmp_path / "model.bin"
        ngramgen.save_model(model, model_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "iterations=2\ngenerator_batch=64\nga_batch=64\nbuffer_size=16\n"
            f"objective=similarity:NCCO\nseed=5\nmodel={model_path}\n")
        out_dir = tmp_path / "out"
        code, _, err = run_cli(capsys, "run", "--config", str(cfg),
                               "--out", str(out_dir))
        assert code == EXIT_OK
        assert (out_dir / "stats.csv").exists()
        assert (out_dir / "buffer.csv").exists()
        assert (out_dir / "manifest.json").exists()

        code, _, err = run_cli(capsys, "resume", "--state",
                               str(out_dir / "state.json"), "--out",
                               str(out_dir))
        assert code == EXIT_OK
        assert "finished" in err

        report_dir = tmp_path / "rep"
        code, _, _ = run_cli(capsys, "report", "--state",
                             str(out_dir / "state.json"), "--out",
                             str(report_dir))
        assert code == EXIT_OK
        assert (report_dir / "stats.csv").read_bytes() == \
            (out_dir / "stats.csv").read_bytes()

    def test_bad_config_is_data_error(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense_key=1\n")
        code, _, _ = run_cli(capsys, "run", "--config", str(cfg),
                             "--out", str(tmp_path / "x"))
        assert code == EXIT_DATA
