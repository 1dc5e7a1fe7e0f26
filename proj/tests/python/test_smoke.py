"""Smoke tests for the python bindings against the C++ core."""

import math

import pytest

import fixcrew


def make_instance(idx, repo, offset=1):
    line = f"return value + {offset} ;"
    return {
        "id": f"i{idx}",
        "repo": repo,
        "buggy_method": "int get ( ) {\n" + line + "\n}",
        "buggy_line_index": 1,
        "buggy_line": line,
        "fixed_line": f"return value - {offset} ;",
    }


SCRIPT = {
    "stage_table": {
        "report": "The sign is flipped.",
        "pattern": "Sign bugs flip the operator.",
        "explain": "Returns value plus an offset.",
        "generate": "```\nreturn value - 1 ;\n```",
        "review:1": "VERDICT: INCORRECT\nCheck the operator.",
        "review": "VERDICT: CORRECT\nGood.",
        "regenerate": "```\nreturn value - 1 ;\n```",
    }
}


def test_tokenize():
    assert fixcrew.tokenize("if (a>b) return;") == ["if", "(", "a", ">", "b", ")", "return", ";"]
    assert fixcrew.tokenize("") == []
    kinds = dict(fixcrew.tokenize_kinds('s = "a b";'))
    assert kinds['"a b"'] == "string_literal"


def test_metrics():
    assert fixcrew.exact_match("return  x ;", "return x;")
    assert not fixcrew.exact_match("return X;", "return x;")
    assert fixcrew.bleu4("return x ;", "return x ;") == 1.0
    assert math.isclose(fixcrew.bleu4("return x ;", "return y ;"), 0.57735026918962576)
    assert fixcrew.levenshtein("return x ;", "return y ;") == 1
    results = [("return x ;", ["return x ;" if i < 501 else "nope ;"]) for i in range(2292)]
    assert fixcrew.fix_at_k(results, 1) == 21.86


def test_split_has_no_repo_leakage():
    records = [make_instance(f"{r}_{i}", f"repo{r}") for r in range(12) for i in range(5)]
    split = fixcrew.split_dataset(records, seed=9)
    assert len(split["train"]) + len(split["valid"]) + len(split["test"]) == len(records)
    repos = {k: {x["repo"] for x in split[k]} for k in ("train", "valid", "test")}
    assert not (repos["train"] & repos["valid"])
    assert not (repos["train"] & repos["test"])
    assert not (repos["valid"] & repos["test"])


def test_bm25_top_k():
    corpus = [make_instance(i, f"repo{i}", offset=i) for i in range(8)]
    index = fixcrew.Bm25Index.build(corpus)
    assert index.doc_count == 8
    query = make_instance("q", "query_repo", offset=3)
    top = index.top_k(query, k=3)
    assert len(top) == 3
    assert top[0]["instance_id"] == "i3"  # shares the literal offset token
    assert top[0]["score"] >= top[1]["score"] >= top[2]["score"]


def test_patch_and_verdict_parsing():
    assert fixcrew.extract_patch("```\nreturn x;\n```") == "return x;"
    assert fixcrew.extract_patch("Here is the fix:\nreturn x;") == "Here is the fix:"
    with pytest.raises(RuntimeError):
        fixcrew.extract_patch("   \n")
    passed, feedback = fixcrew.parse_verdict("verdict: correct\nfine")
    assert passed and "fine" in feedback
    passed, _ = fixcrew.parse_verdict("hard to say")
    assert not passed


def test_run_pipeline_end_to_end():
    corpus = [make_instance(f"t{i}", f"train_repo{i}") for i in range(4)]
    instance = make_instance("x", "test_repo")
    result = fixcrew.run_pipeline(instance, SCRIPT, corpus=corpus)
    assert result["status"] == "completed"
    assert result["final_patch"] == "return value - 1 ;"
    assert result["passed_review"]
    assert result["turns_used"] == 2
    assert result["stages"] == [
        "report", "pattern", "explain", "generate", "review", "regenerate", "review",
    ]
    assert fixcrew.exact_match(result["final_patch"], instance["fixed_line"])


def test_run_benchmark_writes_transcripts(tmp_path):
    corpus = [make_instance(f"t{i}", f"train_repo{i}") for i in range(4)]
    instances = [make_instance(f"b{i}", "bench_repo") for i in range(6)]
    results = fixcrew.run_benchmark(
        instances, SCRIPT, str(tmp_path / "run"), corpus=corpus, workers=2
    )
    assert [r["instance_id"] for r in results] == [f"ib{i}" for i in range(6)]
    assert (tmp_path / "run" / "results.jsonl").exists()
    assert len(list((tmp_path / "run" / "transcripts").iterdir())) == 6


def test_evaluate_and_overlap():
    report = fixcrew.evaluate([
        ("a", "return x ;", "return x ;"),
        ("b", "return y ;", "return x ;"),
    ])
    assert report["n"] == 2
    assert report["fix_at_1"] == 50.0
    matrix = fixcrew.overlap([("m1", ["a", "b"]), ("m2", ["b", "c"])])
    assert matrix["uniques"] == [1, 1]
    assert matrix["rates"][0][1] == 0.5
