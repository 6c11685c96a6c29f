import json

import pytest

from annoloop.cli import main
from annoloop.corpus import load_store

MINI_WORDS = "survey station river valley archive ledger "


def make_corpus(path, n=6, tokens=120, tasks=5):
    with open(path, "w") as fp:
        for i in range(n):
            text = (MINI_WORDS * 40).split()[:tokens]
            text[0] = f"Entry{i}"
            fp.write(
                json.dumps(
                    {
                        "id": f"c{i}",
                        "title": f"T{i}",
                        "text": " ".join(text),
                        "tasks": [f"task{j}" for j in range(tasks)],
                        "provenance": {"source": "test"},
                    }
                )
                + "\n"
            )


class TestSimulateCommand:
    def test_writes_artifacts_and_prints_table(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            ["simulate", "--seed", "3", "--examples-per-setting", "5", "--out", str(out)]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "Setting" in stdout and "vMER (%)" in stdout
        assert (out / "events.ndjson").exists()
        assert (out / "corpus.ndjson").exists()
        assert len(list((out / "reports").glob("*.json"))) == 20

    def test_metrics_replays_simulation_log(self, tmp_path, capsys):
        out = tmp_path / "run"
        main(["simulate", "--seed", "3", "--examples-per-setting", "5", "--out", str(out)])
        capsys.readouterr()
        code = main(
            [
                "--config",
                str(_write_config(tmp_path)),
                "metrics",
                "--log",
                str(out / "events.ndjson"),
                "--json",
            ]
        )
        assert code == 0
        reports = json.loads(capsys.readouterr().out)
        assert len(reports) == 20
        assert all(r["n_examples"] == 5 for r in reports)

    def test_export_from_simulation_log(self, tmp_path, capsys):
        out = tmp_path / "run"
        main(["simulate", "--seed", "3", "--examples-per-setting", "5", "--out", str(out)])
        capsys.readouterr()
        target = tmp_path / "dataset.json"
        code = main(
            [
                "--config",
                str(_write_config(tmp_path)),
                "export",
                "--log",
                str(out / "events.ndjson"),
                "--setting",
                "adversarial:none:none:np",
                "--out",
                str(target),
            ]
        )
        assert code == 0
        document = json.loads(target.read_text())
        assert document["version"] == "1.1"
        assert json.loads(target.with_suffix(".meta.json").read_text())["setting"]


def _write_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"storage_path": str(tmp_path / "storage")}))
    return path


class TestFilterCorpus:
    def test_keeps_and_reports(self, tmp_path, capsys):
        src = tmp_path / "raw.ndjson"
        make_corpus(src, n=4, tokens=120)
        with open(src, "a") as fp:
            fp.write(
                json.dumps(
                    {
                        "id": "short",
                        "title": "S",
                        "text": "too short",
                        "tasks": ["a", "b", "c", "d", "e"],
                        "provenance": {},
                    }
                )
                + "\n"
            )
        dst = tmp_path / "kept.ndjson"
        code = main(["filter-corpus", "--input", str(src), "--output", str(dst)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["input"] == 5
        assert report["rejected_length"] == 1
        assert len(load_store(dst)) == 4

    def test_exclusion_file_shapes(self, tmp_path, capsys):
        src = tmp_path / "raw.ndjson"
        make_corpus(src, n=2, tokens=120)
        contaminated = " ".join((MINI_WORDS * 40).split()[:50])
        squad = tmp_path / "dev.json"
        squad.write_text(
            json.dumps({"data": [{"paragraphs": [{"context": contaminated, "qas": []}]}]})
        )
        dst = tmp_path / "kept.ndjson"
        code = main(
            ["filter-corpus", "--input", str(src), "--output", str(dst), "--exclude", str(squad)]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["rejected_overlap"] == 2
        assert report["kept"] == 0

    def test_missing_input_is_reported_not_raised(self, tmp_path, capsys):
        code = main(
            [
                "filter-corpus",
                "--input",
                str(tmp_path / "absent.ndjson"),
                "--output",
                str(tmp_path / "out.ndjson"),
            ]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestPrewarm:
    def test_prewarm_writes_caches(self, tmp_path, capsys):
        storage = tmp_path / "storage"
        storage.mkdir()
        make_corpus(storage / "corpus.ndjson", n=2, tokens=120)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"storage_path": str(storage), "cache_depth": 2}))
        code = main(["--config", str(config), "prewarm"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "squad: cached" in stdout
        for source in ("squad", "adversarialqa", "combined"):
            cache = storage / f"cache-{source}.ndjson"
            assert cache.exists() and cache.stat().st_size > 0


class TestThinClient:
    def test_metrics_via_url(self, monkeypatch, capsys):
        import annoloop.cli as cli

        def fake_get_json(base, path, params):
            assert base == "http://svc" and path == "/v1/metrics"
            return {"reports": [], "table": "Setting  n"}

        monkeypatch.setattr(cli, "_get_json", fake_get_json)
        assert main(["metrics", "--url", "http://svc"]) == 0
        assert "Setting  n" in capsys.readouterr().out
