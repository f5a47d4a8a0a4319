#!/usr/bin/env python3
"""Generate the bundled toy fixture under fixtures/toy/.

Everything is synthetic: invented mineral names with invented properties. The
raw corpus mixes fact documents, exam-style documents that spell out each
benchmark question followed by its answer letter, and paper-like documents
that exercise tables, captions, citations, formulas and cleaning rules. The
signal file covers every signal kind, including a handful of records that the
restructurers must reject.

Run from the repository root:  python3 scripts/make_toy_fixture.py
"""

import json
import os
import random

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures", "toy")

COLORS = ["red", "blue", "green", "white", "black", "yellow", "purple", "grey"]
ROCKS = ["basalt", "granite", "shale", "marble", "gneiss", "schist", "chalk", "slate"]
REGIONS = ["Norland", "Vesk", "Tamar", "Oruna", "Kelso", "Brandt", "Ilvar", "Dunmore"]
SYSTEMS = ["cubic", "hexagonal", "monoclinic", "triclinic", "tetragonal"]
DISCIPLINES = ["Mineralogy", "Petrology", "Geochemistry", "Sedimentology", "Volcanology", "Geophysics"]

PREFIXES = ["zor", "kel", "bran", "vy", "tal", "mor", "quen", "dra", "fen", "lum", "ost", "pir", "sul", "tov",
            "xan", "yor", "gal", "hob", "jin", "nev"]
SUFFIXES = ["vite", "banite", "lite", "nite"]


def mineral_names(rng, n):
    names = set()
    while len(names) < n:
        names.add(rng.choice(PREFIXES) + rng.choice(["", "a", "o", "e"]) + rng.choice(SUFFIXES))
    return sorted(names)


def choice_prompt(question, choices):
    lines = [question, "Choose from:"]
    for label in sorted(choices):
        lines.append(f"{label}. {choices[label]}")
    lines.append("The answer is:")
    return "\n".join(lines)


def write_jsonl(name, rows):
    with open(os.path.join(OUT, name), "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    rng = random.Random(20240117)
    os.makedirs(OUT, exist_ok=True)

    names = mineral_names(rng, 40)
    minerals = []
    for i, name in enumerate(names):
        minerals.append({
            "name": name,
            "cap": name.capitalize(),
            "color": rng.choice(COLORS),
            "rock": rng.choice(ROCKS),
            "region": rng.choice(REGIONS),
            "system": rng.choice(SYSTEMS),
            "hardness": rng.randint(2, 9),
            "discipline": rng.choice(DISCIPLINES),
            "code": f"R{70001 + i:06d}",
        })

    # ---- objective benchmark: one question per mineral ----
    objective = []
    attributes = [("color", COLORS, "What color is {cap}?"),
                  ("rock", ROCKS, "Which rock hosts {cap}?"),
                  ("region", REGIONS, "Where was {cap} first found?"),
                  ("system", SYSTEMS, "What crystal system does {cap} have?")]
    for i, m in enumerate(minerals):
        attr, pool, template = attributes[i % len(attributes)]
        n_choices = 4 if i % 10 not in (3, 7) else (3 if i % 10 == 3 else 5)
        distractors = [v for v in pool if v != m[attr]]
        rng.shuffle(distractors)
        options = distractors[: n_choices - 1] + [m[attr]]
        rng.shuffle(options)
        labels = "ABCDE"[:n_choices]
        choices = {labels[k]: options[k] for k in range(n_choices)}
        answer = labels[options.index(m[attr])]
        objective.append({
            "id": f"obj-{i:03d}",
            "question": template.format(cap=m["cap"]),
            "choices": choices,
            "answer": answer,
            "subset": "npee" if i % 2 == 0 else "aptest",
        })
    write_jsonl("bench_objective.jsonl", objective)

    subjective = [
        {"id": "subj-000", "kind": "word_explanation", "question": "Explain the term " + minerals[0]["cap"] + ".",
         "reference_answer": f"{minerals[0]['cap']} is a {minerals[0]['color']} mineral found in {minerals[0]['rock']}."},
        {"id": "subj-001", "kind": "fill_blank", "question": f"{minerals[1]['cap']} is a ____ mineral.",
         "reference_answer": minerals[1]["color"]},
        {"id": "subj-002", "kind": "essay", "question": f"Describe where {minerals[2]['cap']} occurs.",
         "reference_answer": f"{minerals[2]['cap']} occurs in {minerals[2]['rock']} in {minerals[2]['region']}."},
        {"id": "subj-003", "kind": "word_explanation", "question": "Explain the term " + minerals[3]["cap"] + ".",
         "reference_answer": f"{minerals[3]['cap']} is a {minerals[3]['color']} mineral found in {minerals[3]['rock']}."},
        {"id": "subj-004", "kind": "fill_blank", "question": f"{minerals[4]['cap']} is hosted by ____.",
         "reference_answer": minerals[4]["rock"]},
        {"id": "subj-005", "kind": "essay", "question": "Summarize what is known about " + minerals[5]["cap"] + ".",
         "reference_answer": f"{minerals[5]['cap']} is {minerals[5]['color']}, {minerals[5]['system']}, "
                             f"and was first found in {minerals[5]['region']}."},
    ]
    write_jsonl("bench_subjective.jsonl", subjective)

    # ---- raw corpus ----
    docs = []

    def fact_sentence(m):
        return (f"{m['cap']} is a {m['color']} mineral with a {m['system']} crystal system. "
                f"It is hosted by {m['rock']} and was first found in {m['region']}. "
                f"Its hardness is {m['hardness']}.")

    for i, m in enumerate(minerals):
        docs.append({"doc_id": f"wiki-{i:03d}", "source": "wiki",
                     "blocks": [{"kind": "paragraph", "text": fact_sentence(m)}]})

    for copy in range(2):
        for i, item in enumerate(objective):
            text = choice_prompt(item["question"], item["choices"]) + " " + item["answer"]
            docs.append({"doc_id": f"exam-{copy}-{i:03d}", "source": "paper_metadata",
                         "blocks": [{"kind": "paragraph", "text": text}]})

    for i in range(80):
        a, b = rng.sample(minerals, 2)
        blocks = [
            {"kind": "paragraph",
             "text": f"We report field observations of {a['cap']} and {b['cap']} in {a['region']}. "
                     f"Both occur in {a['rock']} outcrops."},
        ]
        if i % 4 == 0:
            blocks.append({"kind": "table", "header_rows": 1,
                           "cells": [["Mineral", "Color", "Hardness"],
                                     [a["cap"], a["color"], str(a["hardness"])],
                                     [b["cap"], b["color"], str(b["hardness"])]]})
        if i % 4 == 1:
            blocks.append({"kind": "figure_caption", "text": f"Figure {i % 7 + 1}. Map of {a['region']} outcrops"})
        if i % 4 == 2:
            blocks.append({"kind": "citation", "marker_text": f"[{i % 30 + 1}]",
                           "resolved_title": f"Mineral assemblages of {b['region']}"})
            blocks.append({"kind": "citation", "marker_text": f"[{i % 30 + 2}]", "resolved_title": None})
        if i % 4 == 3:
            blocks.append({"kind": "formula", "text": "rho = m / V" if i % 8 == 3 else "H = {a + b"})
        if i % 5 == 0:
            blocks.append({"kind": "paragraph", "text": "Downloaded from the archive on 2021-03-04. All rights reserved."})
        if i % 6 == 0:
            blocks.append({"kind": "paragraph", "text": "##@@%%&&**^^~~||##@@%%&&**^^~~||"})
        if i % 7 == 0:
            blocks.append({"kind": "paragraph", "text": "Fig."})
        blocks.append({"kind": "paragraph",
                       "text": f"The {b['system']} habit of {b['cap']} distinguishes it from {a['cap']}   "
                               f"(see  page\t{i + 3})."})
        docs.append({"doc_id": f"paper-{i:03d}", "source": "paper", "blocks": blocks})
    write_jsonl("raw_corpus.jsonl", docs)

    with open(os.path.join(OUT, "rules.toml"), "w", encoding="utf-8", newline="\n") as f:
        f.write("# Cleaning rules for the toy corpus\n")
        f.write("min_paragraph_chars = 30\n")
        f.write("max_nonword_ratio = 0.4\n\n")
        f.write("[[rule]]\npattern = \"Downloaded from the archive\"\naction = \"drop_block\"\n\n")
        f.write("[[rule]]\npattern = \"\\\\(see +page\\\\s+[0-9]+\\\\)\"\naction = \"drop_span\"\n\n")
        f.write("[[rule]]\npattern = \"distinguishes\"\naction = \"replace\"\nreplacement = \"separates\"\n")

    # ---- signals ----
    signals = []

    def add(kind, sid, **fields):
        row = {"id": sid, "signal": kind}
        row.update(fields)
        signals.append(row)

    for i, m in enumerate(minerals):
        add("g7", f"g7-{i:03d}", term=m["cap"],
            definition=f"A {m['color']} {m['system']} mineral hosted by {m['rock']}.  ")
        add("g10", f"g10-{i:03d}", statement=f"{m['cap']} is a {m['color']} mineral.", is_true=True)
        add("g10", f"g10b-{i:03d}", statement=f"{m['cap']} has a {m['system']} crystal system.", is_true=True)
        wrong = next(c for c in COLORS if c != m["color"])
        add("g10", f"g10c-{i:03d}", statement=f"{m['cap']} is a {wrong} mineral.", is_true=False)
        add("kv", f"kv-{i:03d}", entity_name=f"{m['code']} ({m['cap']})",
            pairs=[["Name", m["cap"]], ["Color", m["color"]], ["Crystal system", m["system"]],
                   ["Locality", m["region"]]])
        add("g9", f"g9-{i:03d}", question=objective[i]["question"],
            answer=objective[i]["choices"][objective[i]["answer"]])
        add("g9", f"g9b-{i:03d}", question=f"How hard is {m['cap']}?", answer=f"Its hardness is {m['hardness']}.")
        add("g8", f"g8-{i:03d}", term=m["cap"], synonyms=[f"{m['name']} ore"] if i % 2 == 0 else [],
            hypernyms=[f"{m['system']} mineral"], hyponyms=[f"{m['region']} {m['name']}"] if i % 3 == 0 else [])
        add("g2", f"g2-{i:03d}", subject_text=f"crystal chemistry of {m['name']}", label=m["discipline"],
            label_set_id="dde18")

    for i in range(150):
        a, b = rng.sample(minerals, 2)
        para = f"{a['cap']} occurs with {b['cap']} in {a['rock']} near {a['region']}."
        ents = [b["cap"], a["cap"], a["rock"]] if i % 2 else [a["rock"], a["cap"]]
        add("g5", f"g5-{i:03d}", paragraph=para, entities=ents)
        add("g6", f"g6-{i:03d}", concept_a=a["cap"], concept_b=b["cap"],
            paragraph_a=fact_sentence(a), paragraph_b=fact_sentence(b), relation_exists=a["rock"] == b["rock"])
        if i < 60:
            add("g1", f"g1-{i:03d}", title=f"{a['cap']} and {b['cap']} in {a['region']}",
                abstract=f"We describe {a['color']} {a['cap']} and {b['color']} {b['cap']} from {a['rock']} "
                         f"outcrops of {a['region']}, and compare their crystal systems.")
            add("g3", f"g3-{i:03d}", citing_context=f"Earlier work mapped {b['cap']} in {b['region']} [{i + 1}].",
                cited_title=f"A survey of {b['region']} minerals")
            add("g4", f"g4-{i:03d}", caption_kind="figure" if i % 2 else "table",
                caption=f"Distribution of {a['cap']} in {a['region']}",
                surrounding_mention=f"The distribution shows {a['cap']} concentrated in {a['rock']}.")
        if i < 20:
            add("g2", f"g2d-{i:03d}", subject_text=f"{a['name']} deposit", label="Mineralogy", label_set_id="dict8")

    # Records the restructurers must reject.
    add("g5", "bad-ner-000", paragraph="Basalt overlies shale.", entities=["quartz"])
    add("g6", "bad-rel-000", concept_a="Basalt", concept_b="Basalt", paragraph_a="x basalt", paragraph_b="y basalt",
        relation_exists=True)
    add("g10", "bad-neg-000", statement="Erosion shaped the valley.", is_true=True)
    add("g2", "bad-cls-000", subject_text="river terraces", label="Astrology", label_set_id="dde18")
    add("g7", "bad-exp-000", term="Moraine", definition="   ")
    add("g8", "bad-tax-000", term="Tuff", synonyms=[], hypernyms=[], hyponyms=[])
    write_jsonl("signals.jsonl", signals)

    plan = {"seed": 0, "dedup": True, "targets": {
        "explanation": 40, "ner": 100, "reasoning": 60, "fact_verification": 120, "summarization": 60,
        "text_classification": 40, "word_semantics": 60, "question_answering": 160}}
    with open(os.path.join(OUT, "plan.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(plan, f, indent=2, sort_keys=True)
        f.write("\n")

    # ---- general instructions (stage 1) ----
    general = []
    words = ["river", "stone", "cloud", "valley", "storm", "field", "glacier", "delta", "ridge", "canyon"]
    for i in range(100):
        kind = i % 4
        if kind == 0:
            a, b = rng.randint(1, 9), rng.randint(1, 9)
            rec = ("What is {} plus {}?".format(a, b), "", str(a + b))
        elif kind == 1:
            w = rng.choice(words)
            rec = ("Write the word in capital letters.", w, w.upper())
        elif kind == 2:
            w = rng.choice(words)
            rec = ("Reverse the letters of the word.", w, w[::-1])
        else:
            ws = rng.sample(words, 3)
            rec = ("List the words in alphabetical order.", ", ".join(ws), ", ".join(sorted(ws)))
        general.append({"task": "question_answering", "instruction": rec[0], "input": rec[1], "output": rec[2],
                        "provenance": {"source_kind": "general", "source_id": f"gen-{i:03d}"}})
    write_jsonl("general.jsonl", general)

    config = {
        "paths": {
            "raw_corpus": "raw_corpus.jsonl",
            "rules": "rules.toml",
            "signals": "signals.jsonl",
            "sampling_plan": "plan.json",
            "general_instructions": "general.jsonl",
            "objective_bench": "bench_objective.jsonl",
            "subjective_bench": "bench_subjective.jsonl",
            "output_root": "run",
        },
        "seeds": {"templates": 11, "sampling": 12, "init": 13, "pretrain": 14, "lora": 15, "tune": 16},
        "model": {"d_model": 64, "n_layers": 2, "n_heads": 4, "context_len": 256},
        "pretrain": {"learning_rate": 0.003, "global_batch": 8, "micro_batch": 4, "total_steps": 1500,
                     "warmup_steps": 25, "checkpoint_every": 300},
        "tune": {
            "lora": {"r": 8, "alpha": 16, "targets": ["q_proj", "k_proj", "v_proj"]},
            "general": {"epochs": 1, "lr": 0.0005, "batch_size": 8, "loss_masking": "output_only"},
            "expert": {"epochs": 1, "lr": 0.0005, "batch_size": 8, "loss_masking": "output_only"},
        },
        "eval": {"max_new": 32},
        "versions": {"prompt": "v1", "templates": "v1", "format": "TLM1", "sft_layout": "sft-v1"},
    }
    with open(os.path.join(OUT, "pipeline.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(config, f, indent=2)
        f.write("\n")

    print(f"{len(docs)} documents, {len(signals)} signals, {len(objective)} objective items")


if __name__ == "__main__":
    main()
