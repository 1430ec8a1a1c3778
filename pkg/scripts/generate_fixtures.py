#!/usr/bin/env python3
"""Generate the test fixture corpora under tests/fixtures/.

Deterministic (seeded) so the committed files are reproducible:

    python3 scripts/generate_fixtures.py

extraction_corpus.json holds model-output texts with an embedded JSON
object (or none); each entry carries the expected payload for an
independent parser. structural_corpus.json holds raw per-frame detection
batches covering every violation class plus clean and near-miss cases;
expected verdicts are not stored, they come from the reference checker at
test time.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def _det(pid=0, x0=10, y0=20, x1=110, y1=220, conf=0.9, emotion="neutral", **extra):
    d = {
        "person_id": pid,
        "bbox": {"x_min": x0, "y_min": y0, "x_max": x1, "y_max": y1},
        "confidence": conf,
        "analysis_result": {"emotion": emotion},
    }
    d.update(extra)
    return d


def extraction_corpus() -> list[dict]:
    simple = {"0": [_det()], "1": []}
    nested = {
        "0": [_det(emotion="happy"), _det(pid=1, x0=200, x1=300, emotion="unknown")],
        "1": [_det(conf=0.25)],
        "2": [],
    }
    tricky_strings = {
        "0": [
            {
                "person_id": 0,
                "bbox": {"x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4},
                "confidence": 0.5,
                "analysis_result": {"emotion": "said \"fine\" {calmly}", "note": "a } b { c"},
            }
        ]
    }
    backslash = {"0": [], "note": "path C:\\frames\\out"}
    unicode_payload = {"0": [_det(emotion="überrascht")], "summary": "café 😀"}

    cases: list[dict] = []

    def case(name: str, text: str, payload=None):
        cases.append(
            {
                "name": name,
                "text": text,
                "expect": "json" if payload is not None else "none",
                "payload": payload,
            }
        )

    j = json.dumps
    # bare and pretty
    case("bare_minified", j(simple), simple)
    case("bare_pretty", json.dumps(nested, indent=2), nested)
    case("bare_with_whitespace", "\n\n   " + j(simple) + "\n\n", simple)
    case("crlf_pretty", json.dumps(simple, indent=1).replace("\n", "\r\n"), simple)
    # fenced
    case("fence_json_tag", "```json\n" + j(nested) + "\n```", nested)
    case("fence_untagged", "```\n" + j(simple) + "\n```", simple)
    case("fence_with_prose", "Sure! Here you go:\n```json\n" + j(simple) + "\n```\nAnything else?", simple)
    case("fence_pretty", "```json\n" + json.dumps(nested, indent=4) + "\n```", nested)
    case("fence_crlf", "```json\r\n" + j(simple) + "\r\n```", simple)
    # prose-wrapped
    case("prose_before", "The detections are as follows: " + j(simple), simple)
    case("prose_after", j(nested) + "\nLet me know if the boxes look off.", nested)
    case("prose_both", "Analysis complete.\n" + j(simple) + "\nConfidence is moderate.", simple)
    case("bullet_list", "- result:\n  " + j(simple) + "\n- done", simple)
    case("colon_inline", "answer:" + j(nested), nested)
    # braces and escapes inside strings
    case("braces_in_strings", j(tricky_strings), tricky_strings)
    case("escaped_quotes", "Model says: " + j(tricky_strings) + " end.", tricky_strings)
    case("trailing_backslash", j(backslash), backslash)
    case("unicode_text", "Result (see below) — " + j(unicode_payload), unicode_payload)
    # decoys before the real object
    case("unbalanced_brace_before", "weights {w1, w2 then " + j(simple), simple)
    case("array_before_object", "scores [0.1, 0.9] then " + j(simple), simple)
    case("two_objects_first_wins", j(simple) + " and also " + j(nested), simple)
    case("label_prefix", "detections_v2 = " + j(nested), nested)
    # deep nesting
    deep = {"0": [{"person_id": 0, "bbox": {"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1},
                   "confidence": 1.0, "analysis_result": {"emotion": "deep"},
                   "meta": {"a": {"b": {"c": {"d": [1, {"e": "f"}]}}}}}]}
    case("deeply_nested", "```json\n" + j(deep) + "\n```", deep)
    case("minified_long", j({str(i): [] for i in range(40)}), {str(i): [] for i in range(40)})
    case("empty_object", "the empty answer {} stands", {})
    case("fence_then_trailing_brace", "```json\n" + j(simple) + "\n```\n} stray", simple)
    case("tab_indented", "\t" + j(nested), nested)
    case("html_like", "<result>" + j(simple) + "</result>", simple)
    case("windows_path_prose", "saved to C:\\out\\a.json " + j(simple), simple)

    # negatives: no recoverable object
    case("neg_empty", "")
    case("neg_prose_only", "I see two people sitting on a bench near a fountain.")
    case("neg_array_only", "[1, 2, 3]")
    case("neg_unclosed", '{"0": [ {"person_id": 0')
    case("neg_reversed_braces", "} closed before open {")
    case("neg_fence_no_json", "```json\n\n```")
    case("neg_brace_words", "in {short we found {nothing of value")
    return cases


_RNG = random.Random(20240817)


def _fuzz_value(kind: str):
    if kind == "int":
        return _RNG.randint(0, 400)
    if kind == "bad_bool":
        return _RNG.choice([True, False])
    if kind == "bad_str":
        return str(_RNG.randint(0, 40))
    if kind == "bad_float":
        return _RNG.randint(0, 40) + 0.5
    raise ValueError(kind)


def structural_corpus() -> list[dict]:
    cases: list[dict] = []

    def case(name: str, entries: dict, note: str = ""):
        cases.append({"name": name, "entries": entries, "note": note})

    # clean shapes
    case("clean_single", {"0": [_det()]})
    case("clean_two_frames", {"0": [_det(), _det(pid=1, x0=150, x1=200)], "1": []})
    case("clean_empty_batch", {"0": [], "1": [], "2": []})
    case("clean_many_ids", {"0": [_det(pid=i, x0=i * 10, x1=i * 10 + 5) for i in range(6)]})
    case("clean_confidence_bounds", {"0": [_det(conf=0), _det(pid=1, conf=1)]})
    case("clean_integral_float_coord", {"0": [_det(x0=10.0, y1=220.0)]},
         "JSON numbers 10.0 mean the integer 10")
    case("clean_extra_detection_key", {"0": [_det(track_hint="a")]},
         "unknown keys are allowed, never fatal")
    case("clean_extra_attribute", {"0": [_det()]}, "")
    case("clean_unknown_emotion", {"0": [_det(emotion="unknown")]})
    # geometric-only problems: structurally fine
    case("geom_inverted_x", {"0": [_det(x0=50, x1=10)]},
         "structurally valid, geometrically inverted")
    case("geom_inverted_y", {"0": [_det(y0=220, y1=20)]})
    case("geom_zero_area", {"0": [_det(x0=10, x1=10)]})
    case("geom_out_of_bounds", {"0": [_det(x1=10_000, y1=10_000)]})

    # missing fields
    for field in ("person_id", "bbox", "confidence", "analysis_result"):
        broken = _det()
        del broken[field]
        case(f"missing_{field}", {"0": [broken]})
    for key in ("x_min", "y_min", "x_max", "y_max"):
        broken = _det()
        del broken["bbox"][key]
        case(f"missing_bbox_{key}", {"0": [broken]})

    # wrong types
    case("bool_person_id", {"0": [_det(pid=True)]}, "true is not the integer 1")
    case("str_person_id", {"0": [_det(pid="0")]}, '"0" is not the integer 0')
    case("float_person_id", {"0": [_det(pid=0.5)]})
    case("bool_coord", {"0": [dict(_det(), bbox={"x_min": False, "y_min": 0, "x_max": 5, "y_max": 5})]})
    case("str_coord", {"0": [dict(_det(), bbox={"x_min": "10", "y_min": 0, "x_max": 50, "y_max": 50})]})
    case("float_coord", {"0": [dict(_det(), bbox={"x_min": 10.5, "y_min": 0, "x_max": 50, "y_max": 50})]})
    case("bbox_array", {"0": [dict(_det(), bbox=[10, 20, 110, 220])]},
         "the contract wants an object, not a 4-array")
    case("bbox_string", {"0": [dict(_det(), bbox="10,20,110,220")]})
    case("confidence_string", {"0": [_det(conf="0.9")]})
    case("confidence_bool", {"0": [_det(conf=True)]})
    case("analysis_not_object", {"0": [dict(_det(), analysis_result="neutral")]})
    case("analysis_int_value", {"0": [dict(_det(), analysis_result={"emotion": 3})]})
    case("analysis_bool_value", {"0": [dict(_det(), analysis_result={"emotion": True})]})
    case("analysis_nested_value", {"0": [dict(_det(), analysis_result={"emotion": {"v": "x"}})]})
    case("detection_not_object", {"0": ["person at left"]})
    case("detection_array", {"0": [[1, 2, 3]]})

    # ranges
    case("negative_person_id", {"0": [_det(pid=-1)]})
    case("negative_coord", {"0": [_det(x0=-5)]})
    case("confidence_above_one", {"0": [_det(conf=1.2)]})
    case("confidence_below_zero", {"0": [_det(conf=-0.1)]})

    # person_id contract
    case("duplicate_ids", {"0": [_det(pid=0), _det(pid=0, x0=200, x1=250)]})
    case("gapped_ids", {"0": [_det(pid=0), _det(pid=2, x0=200, x1=250)]},
         "ids must form 0..n-1")
    case("ids_start_at_one", {"0": [_det(pid=1), _det(pid=2, x0=200, x1=250)]})
    case("ids_reordered_ok", {"0": [_det(pid=1), _det(pid=0, x0=200, x1=250)]},
         "density, not order")
    case("dup_ids_second_frame", {"0": [_det()], "1": [_det(pid=0), _det(pid=0, x0=99, x1=120)]})

    # mixed frames: one good, one bad
    case("mixed_good_bad", {"0": [_det()], "1": [_det(pid="x")], "2": []})
    case("mixed_bad_detection_among_good", {"0": [_det(pid=0), dict(_det(pid=1), confidence=None)]})

    # fuzzed cases, seeded: random single-field corruptions and random clean ones
    for i in range(12):
        clean = {"0": [_det(pid=k, x0=k * 20, x1=k * 20 + _RNG.randint(1, 15),
                            conf=round(_RNG.random(), 3)) for k in range(_RNG.randint(1, 4))]}
        case(f"fuzz_clean_{i}", clean)
    for i, kind in enumerate(["bad_bool", "bad_str", "bad_float"] * 2):
        d = _det()
        d["bbox"]["x_max"] = _fuzz_value(kind)
        case(f"fuzz_coord_{i}_{kind}", {"0": [d]})
    return cases


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    extraction = extraction_corpus()
    structural = structural_corpus()
    (FIXTURE_DIR / "extraction_corpus.json").write_text(
        json.dumps(extraction, indent=2, ensure_ascii=False) + "\n"
    )
    (FIXTURE_DIR / "structural_corpus.json").write_text(
        json.dumps(structural, indent=2, ensure_ascii=False) + "\n"
    )
    negatives = sum(1 for c in extraction if c["expect"] == "none")
    print(f"extraction: {len(extraction)} cases ({negatives} negatives)")
    print(f"structural: {len(structural)} cases")


if __name__ == "__main__":
    main()
