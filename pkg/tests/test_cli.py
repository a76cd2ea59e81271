import json
from pathlib import Path

import pytest

from agenthive.cli import main, read_question
from agenthive.config import config_from_dict, config_to_dict, load_config
from agenthive.datasets import PUBMEDQA_LABELS, dump_instances, synthetic_questions
from agenthive.engine import LLMBackendConfig, ScriptedBackendConfig
from agenthive.errors import ConfigInvalid
from agenthive.memory_pool import MemoryPool

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def question_file(tmp_path):
    path = tmp_path / "q.txt"
    path.write_text(
        "An 83-year-old woman has LLQ pain, guarding and leukocytosis. Most likely diagnosis?\n"
        "A) Appendicitis\nB) Colorectal cancer\nC) Colonic diverticulitis\nD) Pseudomembranous colitis\n",
        encoding="utf-8",
    )
    return path


class TestConfig:
    def test_bundled_configs_load(self):
        for path in CONFIGS.glob("*.toml"):
            load_config(path)

    def test_scripted(self):
        config = load_config(CONFIGS / "split.toml")
        assert isinstance(config.backend, ScriptedBackendConfig)
        assert [b.answer for b in config.backend.agents] == list("CCCBA")

    def test_llm(self):
        config = load_config(CONFIGS / "llm.toml")
        assert isinstance(config.backend, LLMBackendConfig)
        assert config.backend.endpoint.model == "meta-llama/Llama-3.1-70B-Instruct"
        assert config.scheduler == "concurrent"

    def test_round_trip(self):
        config = load_config(CONFIGS / "oracle-biased.toml")
        assert config_from_dict(config_to_dict(config)) == config

    @pytest.mark.parametrize(
        "data",
        [
            {"protocol": {"n": 5, "agents": 3}},
            {"ablation": {"debate": False}},
            {"backend": {"kind": "quantum"}},
            {"backend": {"kind": "scripted"}},
            {"backend": {"kind": "llm", "model": "m"}},
            {"protocol": {"tau_agree": 0.4}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigInvalid):
            config_from_dict(data)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(ConfigInvalid, match="nowhere.toml"):
            load_config(tmp_path / "nowhere.toml")


class TestReadQuestion:
    def test_text_with_options(self, question_file):
        q = read_question(str(question_file))
        assert q.domain == ("A", "B", "C", "D") and q.options["C"] == "Colonic diverticulitis"
        assert q.id == "q" and q.question.startswith("An 83-year-old")

    def test_literal_yes_no(self):
        q = read_question("Do statins prevent atrial fibrillation after surgery?")
        assert q.domain == PUBMEDQA_LABELS

    def test_medqa_json(self, tmp_path):
        path = tmp_path / "item.json"
        path.write_text(json.dumps({"question": "Q?", "options": {"A": "a", "B": "b", "C": "c", "D": "d"},
                                    "answer_idx": "b"}))
        q = read_question(str(path))
        assert q.gold == "B" and q.id == "item"


class TestRun:
    def test_unanimous(self, question_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--question", str(question_file), "--config", str(CONFIGS / "unanimous.toml"),
                     "--out", str(out)])
        stdout = capsys.readouterr().out
        assert code == 0
        assert stdout.splitlines()[0] == "ANSWER: C (Confirmatory, k*=3)"
        assert "agreement: k=1: 1.00, k=2: 1.00, k=3: 1.00" in stdout
        pool = MemoryPool.load(out / "q.trace")
        final = pool.read_all()[-1].payload
        assert final.answer == "C"
        assert "Debate:" not in final.trace
        result = json.loads((out / "q.result.json").read_text())
        assert result["answer"] == "C" and result["rounds"] == 3

    def test_split(self, question_file, tmp_path, capsys):
        code = main(["run", "--question", str(question_file), "--config", str(CONFIGS / "split.toml"),
                     "--out", str(tmp_path)])
        assert code == 0
        assert capsys.readouterr().out.startswith("ANSWER: C (WeightedVote, k*=5)")

    def test_missing_config(self, question_file, tmp_path, capsys):
        missing = tmp_path / "hive.cfg"
        code = main(["run", "--question", str(question_file), "--config", str(missing)])
        assert code == 1
        assert str(missing) in capsys.readouterr().err

    def test_backend_fatal_exit_code(self, question_file, tmp_path):
        cfg = tmp_path / "dying.toml"
        cfg.write_text(
            '[protocol]\nn = 3\n[backend]\nkind = "scripted"\n'
            '[[backend.agents]]\nbehavior = "FixedAnswer"\nanswer = "C"\nfail_at_round = 2\n'
        )
        assert main(["run", "--question", str(question_file), "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_all_invalid_exit_code(self, tmp_path):
        cfg = tmp_path / "invalid.toml"
        cfg.write_text('[backend]\nkind = "scripted"\n[[backend.agents]]\nbehavior = "FixedAnswer"\nanswer = "Z"\n')
        # answer Z is outside the yes/no/maybe domain, so every vote is INVALID
        assert main(["run", "--question", "Is it?", "--config", str(cfg), "--out", str(tmp_path)]) == 3

    def test_usage_error(self, capsys):
        assert main_exit(["run"]) == 1


def main_exit(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def write_dataset(tmp_path, count=30):
    path = tmp_path / "data.jsonl"
    dump_instances(synthetic_questions(count, seed=4), path)
    return path


class TestBench:
    def test_report_files_and_determinism(self, tmp_path, capsys):
        data = write_dataset(tmp_path)
        bodies = []
        for name in ("one", "two"):
            out = tmp_path / name
            argv = ["bench", "--dataset", str(data), "--kind", "native", "--config",
                    str(CONFIGS / "oracle-biased.toml"), "--out", str(out)]
            assert main(argv) == 0
            bodies.append(((out / "bench-native-full.json").read_bytes(), (out / "bench-native-full.csv").read_bytes()))
        assert bodies[0] == bodies[1]
        report = json.loads(bodies[0][0])
        assert report["n_scored"] == 30 and report["f1_averaging"] == "macro"

    def test_concurrent_jobs_match_sequential(self, tmp_path):
        data = write_dataset(tmp_path, 12)
        base = ["bench", "--dataset", str(data), "--kind", "native", "--config", str(CONFIGS / "oracle-biased.toml")]
        assert main(base + ["--out", str(tmp_path / "seq")]) == 0
        assert main(base + ["--out", str(tmp_path / "par"), "--jobs", "4", "--scheduler", "concurrent"]) == 0
        assert (tmp_path / "seq" / "bench-native-full.csv").read_bytes() == \
            (tmp_path / "par" / "bench-native-full.csv").read_bytes()

    def test_ablation_label(self, tmp_path, capsys):
        data = tmp_path / "p.jsonl"
        data.write_text("".join(
            json.dumps({"question": f"Q{i}?", "contexts": ["c"], "final_decision": "yes"}) + "\n" for i in range(5)
        ))
        argv = ["bench", "--dataset", str(data), "--kind", "pubmedqa", "--limit", "3", "--ablate", "role_assignment",
                "--config", str(CONFIGS / "oracle-biased.toml"), "--out", str(tmp_path)]
        assert main(argv) == 0
        report = json.loads((tmp_path / "bench-pubmedqa-wo-role_assignment.json").read_text())
        assert report["label"] == "w/o Self-Evolving Role Assignment"
        assert report["n_scored"] == 3

    def test_empty_dataset(self, tmp_path, capsys):
        data = tmp_path / "empty.jsonl"
        data.write_text("")
        argv = ["bench", "--dataset", str(data), "--config", str(CONFIGS / "unanimous.toml"), "--out", str(tmp_path)]
        assert main(argv) == 1
        assert "no records" in capsys.readouterr().err

    def test_malformed_dataset_reports_line(self, tmp_path, capsys):
        data = tmp_path / "bad.jsonl"
        data.write_text('{"question": "q", "options": {"A": "a", "B": "b", "C": "c", "D": "d"}}\n{oops\n')
        argv = ["bench", "--dataset", str(data), "--config", str(CONFIGS / "unanimous.toml"), "--out", str(tmp_path)]
        assert main(argv) == 1
        assert "line 2" in capsys.readouterr().err


class TestSimulateAndSweep:
    def test_simulate_trajectories(self, tmp_path, capsys):
        argv = ["simulate", "--config", str(CONFIGS / "oracle-biased.toml"), "--questions", "20",
                "--trajectories", "--out", str(tmp_path)]
        assert main(argv) == 0
        lines = (tmp_path / "bench-sim-full-trajectories.jsonl").read_text().splitlines()
        assert len(lines) == 20
        assert json.loads(lines[0])["agreements"]

    def test_simulate_rejects_llm_backend(self, tmp_path):
        assert main(["simulate", "--config", str(CONFIGS / "llm.toml"), "--out", str(tmp_path)]) == 1

    def test_sweep_table(self, tmp_path, capsys):
        argv = ["sweep", "--config", str(CONFIGS / "oracle-biased.toml"), "--n", "3,5", "--questions", "50",
                "--out", str(tmp_path)]
        assert main(argv) == 0
        table = capsys.readouterr().out.strip().splitlines()
        assert [line.split()[0] for line in table[2:]] == ["3", "5"]

    def test_single_row_sweep(self, tmp_path, capsys):
        argv = ["sweep", "--config", str(CONFIGS / "oracle-biased.toml"), "--n", "5", "--questions", "10",
                "--out", str(tmp_path)]
        assert main(argv) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 3

    def test_empty_n_list_is_usage_error(self, tmp_path):
        assert main_exit(["sweep", "--config", str(CONFIGS / "oracle-biased.toml"), "--n", ""]) == 1


class TestTrace:
    @pytest.fixture
    def trace(self, question_file, tmp_path):
        main(["run", "--question", str(question_file), "--config", str(CONFIGS / "unanimous.toml"),
              "--out", str(tmp_path)])
        return tmp_path / "q.trace"

    def test_no_debate_entries(self, trace, capsys):
        assert main(["trace", str(trace), "--phase", "Debate"]) == 0
        assert capsys.readouterr().out.strip() == "no entries"

    def test_agent_filter_keeps_seq_order(self, trace, capsys):
        assert main(["trace", str(trace), "--agent", "2"]) == 0
        lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("#")]
        assert lines and all(" A2: " in line for line in lines)
        seqs = [int(line.split()[0][1:]) for line in lines]
        assert seqs == sorted(seqs) and len(seqs) == 5

    def test_round_filter(self, trace, capsys):
        main(["trace", str(trace), "--phase", "Fusion", "--round", "3"])
        out = capsys.readouterr().out
        assert "== Fusion (round 3) ==" in out and "round 2" not in out

    def test_truncated_trace(self, trace, capsys):
        text = trace.read_text()
        trace.write_text(text[: len(text) // 2])
        assert main(["trace", str(trace)]) == 1
        assert "last valid seq" in capsys.readouterr().err
