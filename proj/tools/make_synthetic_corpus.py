#!/usr/bin/env python3
"""Writes the bundled canonical-format corpus used when the real SNP-phenotype
distribution is not available.

The document, sentence and label counts match the published corpus statistics
(360 / 2525 / 811 positive / 325 negative / 180 neutral). Text is templated so
that each label has its own phrasing; the file is a stand-in for pipeline and
acceptance runs, not a substitute for real annotations.
"""

import argparse
import json
import random

N_DOCS = 360
N_SENTENCES = 2525
LABEL_COUNTS = {"positive": 811, "negative": 325, "neutral": 180}
N_TEST_DOCS = 72

PHENOTYPES = [
    "obesity", "type 2 diabetes", "breast cancer", "asthma", "hypertension", "coronary artery disease",
    "rheumatoid arthritis", "prostate cancer", "schizophrenia", "Alzheimer disease", "psoriasis",
    "colorectal cancer", "migraine", "osteoporosis", "Crohn disease", "lung cancer", "bipolar disorder",
    "atrial fibrillation", "insulin resistance", "myocardial infarction", "gastric cancer", "glaucoma",
    "multiple sclerosis", "chronic kidney disease", "hepatocellular carcinoma", "ischemic stroke",
]
POPULATIONS = [
    "a Chinese Han cohort", "European women", "Korean adults", "a Brazilian sample", "Japanese patients",
    "an Iranian population", "African American men", "a Finnish cohort", "Mexican children", "Indian subjects",
]

TEMPLATES = {
    "positive": [
        ("The {snp} polymorphism was significantly associated with {p0} in {pop}.", 1),
        ("Carriers of the minor allele of {snp} showed an increased risk of {p0} (OR = {or_}, P = {pval}).", 1),
        ("{snp} conferred susceptibility to {p0} in {pop}.", 1),
        ("The variant {snp} was associated with both {p0} and {p1}.", 2),
        ("{snp} increased the risk of {p0} and of {p1} in {pop}.", 2),
    ],
    "negative": [
        ("No significant association was found between {snp} and {p0} in {pop}.", 1),
        ("The {snp} genotype did not influence {p0} (P = {pval_ns}).", 1),
        ("{snp} was not associated with {p0} or {p1}.", 2),
        ("We observed no effect of {snp} on {p0} and {p1} in {pop}.", 2),
    ],
    "neutral": [
        ("{snp} was genotyped in patients with {p0}.", 1),
        ("Whether {snp} affects {p0} remains unclear.", 1),
        ("We examined {snp} in relation to {p0} and {p1}, without a firm conclusion.", 2),
    ],
}

BACKGROUND = [
    "Genome-wide association studies have identified many susceptibility loci.",
    "Genotyping was performed with a TaqMan assay.",
    "The study enrolled {n} cases and {m} controls from {pop}.",
    "Allele frequencies were in Hardy-Weinberg equilibrium.",
    "Further functional studies are needed to confirm these findings.",
    "Linkage disequilibrium between markers was estimated with Haploview.",
    "Logistic regression was adjusted for age, sex and body mass index.",
    "These results warrant replication in larger samples.",
]


def split_groups(rng, n):
    """Splits n candidates into groups of size one or two."""
    sizes = []
    while n > 0:
        s = 2 if n >= 2 and rng.random() < 0.35 else 1
        sizes.append(s)
        n -= s
    return sizes


def make_candidate_sentence(rng, label, size, sid):
    options = [t for t in TEMPLATES[label] if t[1] == size]
    template, _ = rng.choice(options)
    snp = "rs" + str(rng.randint(1000, 99999999))
    phenos = rng.sample(PHENOTYPES, 2)
    fields = {
        "pop": rng.choice(POPULATIONS),
        "or_": "%.2f" % rng.uniform(1.2, 2.8),
        "pval": "%.0e" % rng.uniform(1e-8, 1e-3),
        "pval_ns": "%.2f" % rng.uniform(0.1, 0.9),
    }
    # Build the text piecewise so mention offsets are exact.
    text = ""
    mentions = []
    rest = template
    while rest:
        i = rest.find("{")
        if i < 0:
            text += rest
            break
        text += rest[:i]
        j = rest.index("}", i)
        key = rest[i + 1:j]
        rest = rest[j + 1:]
        if key == "snp":
            mentions.append({"kind": "snp", "surface": snp, "start": len(text), "normalized": snp})
            text += snp
        elif key in ("p0", "p1"):
            surface = phenos[int(key[1])]
            mentions.append({"kind": "phenotype", "surface": surface, "start": len(text), "normalized": None})
            text += surface
        else:
            text += fields[key]

    out_mentions = []
    for k, m in enumerate(mentions):
        out_mentions.append({
            "id": "%s.e%d" % (sid, k),
            "kind": m["kind"],
            "surface": m["surface"],
            "char_start": m["start"],
            "char_end": m["start"] + len(m["surface"]),
            "normalized": m["normalized"],
        })
    snp_id = next(m["id"] for m in out_mentions if m["kind"] == "snp")
    candidates = []
    for k, m in enumerate(m for m in out_mentions if m["kind"] == "phenotype"):
        candidates.append({
            "id": "%s.p%d" % (sid, k),
            "snp_ref": snp_id,
            "pheno_ref": m["id"],
            "label": label,
            "extras": {},
        })
    return {"id": sid, "text": text, "mentions": out_mentions, "candidates": candidates}


def make_background(rng, sid):
    text = rng.choice(BACKGROUND).format(n=rng.randint(150, 3000), m=rng.randint(150, 3000), pop=rng.choice(POPULATIONS))
    return {"id": sid, "text": text, "mentions": [], "candidates": []}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=20190611)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    groups = []
    for label, count in LABEL_COUNTS.items():
        groups += [(label, s) for s in split_groups(rng, count)]
    rng.shuffle(groups)

    per_doc = [N_SENTENCES // N_DOCS] * N_DOCS
    for i in rng.sample(range(N_DOCS), N_SENTENCES - sum(per_doc)):
        per_doc[i] += 1
    slots = [(d, s) for d in range(N_DOCS) for s in range(per_doc[d])]
    chosen = dict(zip(sorted(rng.sample(range(len(slots)), len(groups))), groups))

    test_docs = set(rng.sample(range(N_DOCS), N_TEST_DOCS))
    docs = []
    slot = 0
    for d in range(N_DOCS):
        did = "SYN%04d" % d
        sentences = []
        for s in range(per_doc[d]):
            sid = "%s.s%d" % (did, s)
            if slot in chosen:
                label, size = chosen[slot]
                sentences.append(make_candidate_sentence(rng, label, size, sid))
            else:
                sentences.append(make_background(rng, sid))
            slot += 1
        docs.append({
            "id": did,
            "title": "Synthetic abstract %d" % d,
            "split_hint": "test" if d in test_docs else "train",
            "sentences": sentences,
        })

    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"schema": "snprex-corpus/1"}, separators=(",", ":")) + "\n")
        for doc in docs:
            f.write(json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
