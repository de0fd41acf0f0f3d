import csv
import json
import logging
import subprocess
import sys
from pathlib import Path

import pytest

from fakes import corrupt_page, write_toolchain
from oracles import oracle_similarity
from structocr.align import chunk_text, segment_target
from structocr.cli import RunConfig, UsageError, main
from structocr.corpus import ManifestRecord, read_manifest, write_manifest
from structocr.markup import normalize_text, parse_markup, serialize_markup
from structocr.render import simulate_span_log, write_span_log
from structocr.tei import convert_file

SMALL_TEI = (
    '<TEI xmlns="http://www.tei-c.org/ns/1.0"><teiHeader/><text><body>'
    '<div n="{n}"><head>Περὶ {n}</head><p>λόγος <milestone unit="section" n="2"/> ἀρχή</p></div>'
    "</body></text></TEI>"
)


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def tei_dir(tmp_path, fixtures):
    d = tmp_path / "tei"
    d.mkdir()
    (d / "sample.xml").write_bytes((fixtures / "tei" / "sample.xml").read_bytes())
    for n in (1, 2):
        (d / f"small{n}.xml").write_text(SMALL_TEI.format(n=n), encoding="utf-8")
    return d


@pytest.fixture(scope="module")
def sample_markup():
    blocks, _ = convert_file(Path(__file__).parent / "fixtures" / "tei" / "sample.xml")
    return serialize_markup(blocks)


# -- tei2md ----------------------------------------------------------------------------

def test_tei2md_converts_every_file(capsys, tei_dir, tmp_path):
    out = tmp_path / "md"
    code, stdout, _ = run(capsys, "tei2md", tei_dir, out, "--json")
    assert code == 0
    assert json.loads(stdout) == {"converted": 3, "failed": {}}
    assert sorted(p.name for p in out.glob("*.md")) == ["sample.md", "small1.md", "small2.md"]
    assert (out / "small1.md").read_text("utf-8") == "# <ref>1</ref> Περὶ 1\n<tab/>λόγος <ref>2</ref> ἀρχή\n"
    assert json.loads((out / "sample.cite.json").read_text())["levels"][1]["milestone"] is True


def test_tei2md_malformed_file(capsys, tei_dir, tmp_path):
    (tei_dir / "broken.xml").write_text("<TEI><text><body><p>α</body>", encoding="utf-8")
    out = tmp_path / "md"
    code, _, err = run(capsys, "tei2md", tei_dir, out)
    assert code == 1
    assert "broken.xml" in err
    assert len(list(out.glob("*.md"))) == 3


def test_tei2md_empty_dir(capsys, tmp_path, caplog):
    (tmp_path / "empty").mkdir()
    with caplog.at_level(logging.WARNING):
        code, _, _ = run(capsys, "tei2md", tmp_path / "empty", tmp_path / "md")
    assert code == 0
    assert "no TEI files" in caplog.text


def test_tei2md_parallel_matches_serial(capsys, tei_dir, tmp_path):
    run(capsys, "tei2md", tei_dir, tmp_path / "a")
    run(capsys, "tei2md", tei_dir, tmp_path / "b", "--workers", "3")
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


# -- render ------------------------------------------------------------------------------

@pytest.fixture
def markup_dir(tmp_path, sample_markup):
    d = tmp_path / "markup"
    d.mkdir()
    (d / "sample.md").write_text(sample_markup + "\n", encoding="utf-8")
    return d


def _tree(root) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_render_dry_run_writes_source_pairs(capsys, markup_dir, tmp_path):
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "render", markup_dir, out, "--configs", "3", "--dry-run", "--seed", "4", "--json")
    assert code == 0
    assert len(list(out.rglob("*.tex"))) == 6
    summary = json.loads(stdout)
    assert summary["succeeded"] == 3 and summary["manifest_records"] == 0
    layouts = [json.loads(p.read_text()) for p in sorted(out.rglob("*.layout.json"))]
    assert len({json.dumps(layout, sort_keys=True) for layout in layouts}) == 3


def test_render_is_deterministic(capsys, markup_dir, tmp_path):
    for name in ("a", "b"):
        run(capsys, "render", markup_dir, tmp_path / name, "--configs", "2", "--dry-run", "--seed", "9")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    run(capsys, "render", markup_dir, tmp_path / "c", "--configs", "2", "--dry-run", "--seed", "10")
    assert _tree(tmp_path / "a") != _tree(tmp_path / "c")


def test_render_missing_engine(capsys, markup_dir, tmp_path):
    code, _, err = run(capsys, "render", markup_dir, tmp_path / "out", "--engine", "no-such-engine-xyz {source}")
    assert code == 1
    assert "EngineFailure" in err


def test_render_with_toolchain_builds_manifest(capsys, markup_dir, tmp_path, sample_markup):
    engine, raster = write_toolchain(tmp_path)
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "render", markup_dir, out, "--configs", "2", "--engine", engine,
                          "--raster", raster, "--json")
    assert code == 0, stdout
    records = read_manifest(out / "manifest.jsonl")
    assert [(r.work_id, r.page_no) for r in records] == [("sample_c00", 1), ("sample_c01", 1)]
    assert records[0].markup == sample_markup
    assert records[0].split == records[1].split  # renderings of one document share a split
    assert all((out / f"{r.work_id}_p0001.png").exists() for r in records)


def test_render_env_override(capsys, markup_dir, tmp_path, monkeypatch):
    engine, raster = write_toolchain(tmp_path)
    monkeypatch.setenv("STRUCTOCR_ENGINE", engine)
    monkeypatch.setenv("STRUCTOCR_RASTER", raster)
    code, _, _ = run(capsys, "render", markup_dir, tmp_path / "out")
    assert code == 0
    assert len(read_manifest(tmp_path / "out" / "manifest.jsonl")) == 1


# -- align ------------------------------------------------------------------------------------

@pytest.fixture
def align_inputs(tmp_path, sample_markup):
    log = simulate_span_log(parse_markup(sample_markup), "sample", chars_per_page=600)
    assert log.n_pages == 5
    spans = tmp_path / "sample.spans.jsonl"
    write_span_log(log, spans)
    target = tmp_path / "sample.md"
    target.write_text(sample_markup, encoding="utf-8")
    return log, spans, target


def test_align_clean(capsys, align_inputs, tmp_path):
    _, spans, target = align_inputs
    out = tmp_path / "aligned"
    code, stdout, _ = run(capsys, "align", spans, target, out, "--json")
    report = json.loads(stdout)
    assert code == 0
    assert report["summary"]["retention_rate"] == 1.0
    assert report["similarities"] == [1.0] * 5 and report["dropped"] == []
    records = read_manifest(out / "manifest.jsonl")
    assert [r.page_no for r in records] == [1, 2, 3, 4, 5]
    assert "\n".join(r.markup for r in records).count("# ") == 2
    assert records[0].image_path.endswith("sample_p0001.png")


def test_align_corrupted_page_is_reported(capsys, align_inputs, tmp_path):
    log, spans, target = align_inputs
    noisy, _ = corrupt_page(log, 3, 0.02)
    write_span_log(noisy, spans)
    out = tmp_path / "aligned"
    code, _, _ = run(capsys, "align", spans, target, out)
    report = json.loads((out / "drop_report.json").read_text("utf-8"))
    assert code == 0
    assert [d["page_no"] for d in report["dropped"]] == [3]
    assert [r.page_no for r in read_manifest(out / "manifest.jsonl")] == [1, 2, 4, 5]
    # the reported similarity agrees with the oracle
    chunk3 = segment_target(parse_markup(target.read_text("utf-8")), noisy.page_texts())[0][2]
    expected = oracle_similarity(chunk_text(chunk3), normalize_text(noisy.page_texts()[2]))
    assert report["dropped"][0]["similarity"] == pytest.approx(expected, abs=1e-6) and expected < 0.99


def test_align_threshold_flag_loosens_retention(capsys, align_inputs, tmp_path):
    log, spans, target = align_inputs
    noisy, _ = corrupt_page(log, 3, 0.02)
    write_span_log(noisy, spans)
    code, stdout, _ = run(capsys, "align", spans, target, tmp_path / "o", "--threshold", "0.95", "--json")
    assert code == 0
    assert json.loads(stdout)["summary"]["retained"] == 5


def test_align_page_count_mismatch_is_partial(capsys, align_inputs, tmp_path, sample_markup):
    _, spans, target = align_inputs
    blocks = parse_markup(sample_markup).blocks
    target.write_text(serialize_markup(blocks[:3]), encoding="utf-8")
    out = tmp_path / "aligned"
    code, _, err = run(capsys, "align", spans, target, out)
    assert code == 2
    assert "PageCountMismatch" in err
    assert (out / "manifest.jsonl").exists() and (out / "drop_report.json").exists()


# -- eval --------------------------------------------------------------------------------------

def _hyp_tree(tmp_path, records, edit=lambda r: r.markup):
    hyp = tmp_path / "hyp"
    for r in records:
        path = hyp / r.work_id / f"{r.page_no}.md"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(edit(r), encoding="utf-8")
    return hyp


def test_eval_identity(capsys, fixtures, tmp_path):
    manifest = fixtures / "identity_manifest.jsonl"
    hyp = _hyp_tree(tmp_path, read_manifest(manifest))
    report_path = tmp_path / "report.json"
    code, _, _ = run(capsys, "eval", manifest, hyp, report_path)
    report = json.loads(report_path.read_text())
    assert code == 0
    assert report["cer_med"] == report["cer_mean"] == report["wer_mean"] == 0
    assert report["hdr_f1"] == report["ref_f1"] == report["note_f1"] == 100
    assert report["tab1_spec"] == report["tab1_rec"] == 100
    assert report["missing_hypotheses"] == [] and report["n_pages"] == 20
    rows = list(csv.DictReader(open(tmp_path / "report.csv", encoding="utf-8")))
    assert len(rows) == 20 and rows[0]["work_id"] == "sample"


def test_eval_missing_hypothesis_scores_as_empty(capsys, fixtures, tmp_path):
    report_path = tmp_path / "r.json"
    code, _, _ = run(capsys, "eval", fixtures / "eval" / "manifest.jsonl", fixtures / "eval" / "hyp", report_path,
                     "--csv", tmp_path / "pages.csv")
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["missing_hypotheses"] == ["w2#2"]
    rows = {(r["work_id"], r["page_no"]): r for r in csv.DictReader(open(tmp_path / "pages.csv", encoding="utf-8"))}
    assert float(rows[("w2", "2")]["cer"]) == 100.0


def test_eval_single_error_page(capsys, tmp_path):
    ref = "αβγδεζηθικ" * 10
    manifest = tmp_path / "m.jsonl"
    write_manifest([ManifestRecord("w", 1, "", ref)], manifest)
    hyp = _hyp_tree(tmp_path, read_manifest(manifest), edit=lambda r: "ξ" + r.markup[1:])
    code, stdout, _ = run(capsys, "eval", manifest, hyp, tmp_path / "r.json", "--json")
    report = json.loads(stdout)
    assert code == 0 and report["cer_med"] == report["cer_mean"] == 1.0


def test_eval_notes_flag(capsys, tmp_path):
    manifest = tmp_path / "m.jsonl"
    write_manifest([ManifestRecord("w", 1, "", "<tab/>α β <note>γ</note>")], manifest)
    hyp = _hyp_tree(tmp_path, read_manifest(manifest), edit=lambda r: "<tab/>α β")
    run(capsys, "eval", manifest, hyp, tmp_path / "with.json")
    run(capsys, "eval", manifest, hyp, tmp_path / "without.json", "--no-include-notes")
    with_notes = json.loads((tmp_path / "with.json").read_text())
    without = json.loads((tmp_path / "without.json").read_text())
    assert with_notes["cer_med"] > 0 and without["cer_med"] == 0
    assert without["include_notes"] is False


# -- stats / classify / merge -------------------------------------------------------------------

def test_stats_json(capsys, fixtures, tmp_path):
    code, stdout, _ = run(capsys, "stats", fixtures / "stats_manifest.jsonl")
    stats = json.loads(stdout)
    assert code == 0
    assert stats["pages"] == 12 and stats["words_median"] == 11.5
    assert stats["pct_ref"] == pytest.approx(200 / 3)
    code, _, _ = run(capsys, "stats", fixtures / "stats_manifest.jsonl", "-o", tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text()) == stats


def test_classify_single_milestone_work(capsys, tmp_path):
    manifest = tmp_path / "m.jsonl"
    write_manifest([
        ManifestRecord("hdt", 1, "", "<tab/>ἀρχὴ <ref>2</ref> λόγου"),
        ManifestRecord("hdt", 2, "", "ἔργα <ref>3</ref> μεγάλα"),
    ], manifest)
    code, stdout, _ = run(capsys, "classify", manifest, "--json")
    assert code == 0 and json.loads(stdout) == {"hdt": "milestone"}


def test_merge_hyphen_fixture(capsys, tmp_path):
    manifest = tmp_path / "m.jsonl"
    write_manifest([
        ManifestRecord("w", 2, "", "γου ἀρχή"),
        ManifestRecord("w", 1, "", "<tab/>ἀρχὴ τοῦ λό-"),
    ], manifest)
    code, stdout, _ = run(capsys, "merge", manifest)
    assert code == 0 and json.loads(stdout) == {"w": "<tab/>ἀρχὴ τοῦ λόγου ἀρχή"}


def test_parse_failure_names_record(capsys, tmp_path):
    manifest = tmp_path / "m.jsonl"
    write_manifest([ManifestRecord("w", 4, "", "α <ref>1")], manifest)
    code, _, err = run(capsys, "stats", manifest)
    assert code == 1 and "w#4" in err


# -- usage -----------------------------------------------------------------------------------

@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["stats"],
        ["align", "x", "y", "z", "--threshold", "1.5"],
        ["stats", "/no/such/manifest.jsonl"],
        ["tei2md", "/no/such/dir", "out"],
        ["stats", "m.jsonl", "--workers", "0"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as info:
        sys.exit(main(argv))
    assert info.value.code == 1


def test_run_config_validation(tmp_path):
    with pytest.raises(UsageError):
        RunConfig("eval", threshold=-0.1).validate()
    RunConfig("eval", inputs=[tmp_path], threshold=1.0).validate()


def test_console_script_entry_point(fixtures):
    proc = subprocess.run(
        [sys.executable, "-m", "structocr.cli", "stats", str(fixtures / "stats_manifest.jsonl"), "--json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pages"] == 12
