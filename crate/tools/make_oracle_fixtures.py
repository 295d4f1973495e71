#!/usr/bin/env python3
"""Regenerate the evaluation oracle fixtures.

Builds perturbed system files from a gold CoNLL-U sample and scores every
(gold, system) pair with the CoNLL 2018 shared task evaluation script
(conll18_ud_eval.py, distributed by UFAL and bundled in several pip packages,
e.g. ``trankit/utils/scorers/conll18_ud_eval.py``). The expected scores are
written to ``expected.json`` and asserted by the Rust acceptance suite.

usage: make_oracle_fixtures.py CONLL18_UD_EVAL_PY GOLD_CONLLU OUT_DIR
"""

import copy
import importlib.util
import json
import os
import random
import sys


class Word:
    def __init__(self, cols):
        self.cols = list(cols)

    @property
    def head(self):
        return int(self.cols[6])


class Sentence:
    """Comments, plus a list of tokens; a token is (mwt_form or None, [Word])."""

    def __init__(self):
        self.comments = []
        self.tokens = []
        self.empty = []  # (after_word_id, cols)

    def words(self):
        return [w for _, ws in self.tokens for w in ws]


def read(path):
    sentences, cur, pending_mwt = [], Sentence(), None
    for line in open(path, encoding="utf-8").read().split("\n"):
        if not line:
            if cur.tokens:
                sentences.append(cur)
                cur = Sentence()
            continue
        if line.startswith("#"):
            cur.comments.append(line)
            continue
        cols = line.split("\t")
        if "-" in cols[0]:
            a, b = map(int, cols[0].split("-"))
            pending_mwt = [cols[1], b - a + 1, []]
            continue
        if "." in cols[0]:
            cur.empty.append(cols)
            continue
        w = Word(cols)
        if pending_mwt:
            pending_mwt[2].append(w)
            if len(pending_mwt[2]) == pending_mwt[1]:
                cur.tokens.append((pending_mwt[0], pending_mwt[2]))
                pending_mwt = None
        else:
            cur.tokens.append((None, [w]))
    return sentences


def renumber(sent):
    """Rewrites IDs 1..n in token order and remaps heads by object identity."""
    words = sent.words()
    old_ids = {id(w): int(w.cols[0]) for w in words}
    by_old = {int(w.cols[0]): w for w in words}
    heads = {}
    for w in words:
        h = int(w.cols[6])
        heads[id(w)] = by_old.get(h) if h else None
    for i, w in enumerate(words, 1):
        w.cols[0] = str(i)
    for w in words:
        parent = heads[id(w)]
        w.cols[6] = parent.cols[0] if parent is not None else "0"
    sent.empty = []  # empty nodes are not remapped; drop them after re-tokenization
    return sent


def link_by_object(sent):
    """Converts numeric heads into object references for structural edits."""
    by_id = {int(w.cols[0]): w for w in sent.words()}
    for w in sent.words():
        h = int(w.cols[6])
        w.parent = by_id[h] if h else None


def resolve(sent, repl):
    """Points parents at replacement words; a word never becomes its own parent."""
    for w in sent.words():
        while w.parent is not None and id(w.parent) in repl:
            w.parent = repl[id(w.parent)]
        if w.parent is w:
            w.parent = None


def relink(sent):
    for i, w in enumerate(sent.words(), 1):
        w.cols[0] = str(i)
    for w in sent.words():
        w.cols[6] = w.parent.cols[0] if w.parent is not None else "0"
    sent.empty = []


def write(sentences, path):
    out = []
    for s in sentences:
        out.extend(s.comments)
        wid = 0
        for mwt, ws in s.tokens:
            if mwt is not None:
                out.append("\t".join([f"{wid + 1}-{wid + len(ws)}", mwt] + ["_"] * 8))
            for w in ws:
                wid += 1
                out.append("\t".join(w.cols))
                for e in s.empty:
                    if e[0].split(".")[0] == w.cols[0]:
                        out.append("\t".join(e))
        out.append("")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + "\n")


# ---------------------------------------------------------------- perturbations

UPOS = ["NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "AUX", "PROPN", "PART", "X"]
DEPRELS = ["nsubj", "obj", "obl", "obl:arg", "advmod", "amod", "case", "cc", "det", "aux",
           "aux:clitic", "cop", "mark", "punct", "conj", "nmod", "flat", "iobj", "dep"]


def corrupt_column(sentences, rng, col, rate, values=None):
    for s in sentences:
        for w in s.words():
            if rng.random() < rate:
                if values:
                    w.cols[col] = rng.choice([v for v in values if v != w.cols[col]])
                else:
                    w.cols[col] = w.cols[col] + "x"
    return sentences


def corrupt_feats(sentences, rng, rate):
    for s in sentences:
        for w in s.words():
            if rng.random() < rate and w.cols[5] != "_":
                feats = w.cols[5].split("|")
                op = rng.randrange(3)
                if op == 0 and len(feats) > 1:
                    feats.pop(rng.randrange(len(feats)))
                elif op == 1:
                    i = rng.randrange(len(feats))
                    k, v = feats[i].split("=", 1)
                    feats[i] = k + "=" + ("Sing" if v != "Sing" else "Plur")
                else:
                    feats.append("Foreign=Yes")
                w.cols[5] = "|".join(sorted(set(feats)))
    return sentences


def shuffle_feats(sentences, rng):
    for s in sentences:
        for w in s.words():
            feats = w.cols[5].split("|")
            rng.shuffle(feats)
            w.cols[5] = "|".join(feats)
    return sentences


def change_non_universal_feats(sentences, rng):
    for s in sentences:
        for w in s.words():
            if w.cols[5] != "_":
                feats = [f for f in w.cols[5].split("|") if not f.startswith("Variant=")]
                feats.append("Variant=Long")
                w.cols[5] = "|".join(sorted(feats))
    return sentences


def corrupt_heads(sentences, rng, rate):
    for s in sentences:
        link_by_object(s)
        words = s.words()
        for w in words:
            if w.parent is None or rng.random() >= rate:
                continue
            # reattach to a random word that is not a descendant (keeps a tree)
            desc = set()
            stack = [w]
            while stack:
                x = stack.pop()
                desc.add(id(x))
                stack.extend(c for c in words if c.parent is x)
            cands = [c for c in words if id(c) not in desc and c is not w.parent]
            if cands:
                w.parent = rng.choice(cands)
        relink(s)
    return sentences


def strip_subtypes(sentences):
    for s in sentences:
        for w in s.words():
            w.cols[7] = w.cols[7].split(":")[0]
    return sentences


def change_subtypes(sentences):
    for s in sentences:
        for w in s.words():
            if w.cols[7] in ("obl", "nsubj", "advmod", "aux"):
                w.cols[7] = w.cols[7] + ":extra"
    return sentences


def merge_sentences(sentences, every=2):
    out = []
    i = 0
    while i < len(sentences):
        if i + 1 < len(sentences) and (i // 2) % every == 0:
            a, b = sentences[i], sentences[i + 1]
            link_by_object(a)
            link_by_object(b)
            root_a = next(w for w in a.words() if w.parent is None)
            for w in b.words():
                if w.parent is None:
                    w.parent = root_a
                    w.cols[7] = "parataxis"
            m = Sentence()
            m.comments = a.comments
            m.tokens = a.tokens + b.tokens
            relink(m)
            out.append(m)
            i += 2
        else:
            out.append(sentences[i])
            i += 1
    return out


def split_sentences(sentences, rng, rate):
    out = []
    for s in sentences:
        if len(s.tokens) < 4 or rng.random() >= rate:
            out.append(s)
            continue
        link_by_object(s)
        cut = rng.randrange(2, len(s.tokens) - 1)
        parts = [s.tokens[:cut], s.tokens[cut:]]
        for n, toks in enumerate(parts):
            p = Sentence()
            p.comments = s.comments if n == 0 else []
            p.tokens = toks
            inside = {id(w) for w in p.words()}
            subroots = [w for w in p.words() if w.parent is None or id(w.parent) not in inside]
            root = next((w for w in subroots if w.parent is None), subroots[0])
            for w in subroots:
                if w is root:
                    w.parent = None
                    w.cols[7] = "root"
                else:
                    w.parent = root
            relink(p)
            out.append(p)
    return out


def collapse_mwts(sentences):
    for s in sentences:
        link_by_object(s)
        new_tokens = []
        replace = {}
        for mwt, ws in s.tokens:
            if mwt is None:
                new_tokens.append((None, ws))
                continue
            group = {id(w) for w in ws}
            outer = next((w for w in ws if w.parent is None or id(w.parent) not in group), ws[0])
            nw = Word(outer.cols)
            nw.cols[1] = mwt
            nw.parent = outer.parent
            for w in ws:
                replace[id(w)] = nw
            new_tokens.append((None, [nw]))
        s.tokens = new_tokens
        for _, ws in s.tokens:
            for w in ws:
                while w.parent is not None and id(w.parent) in replace:
                    target = replace[id(w.parent)]
                    w.parent = None if target is w else target
        relink(s)
    return sentences


def unpack_mwts(sentences):
    """MWT words become plain tokens (their forms concatenate to the MWT form)."""
    for s in sentences:
        toks = []
        for mwt, ws in s.tokens:
            if mwt is not None and "".join(w.cols[1] for w in ws) == mwt:
                toks.extend((None, [w]) for w in ws)
            else:
                toks.append((mwt, ws))
        s.tokens = toks
        s.empty = []
    return sentences


def introduce_mwts(sentences, rng, rate):
    for s in sentences:
        link_by_object(s)
        toks = []
        repl = {}
        for mwt, ws in s.tokens:
            w = ws[0]
            if mwt is None and len(w.cols[1]) >= 5 and rng.random() < rate:
                k = len(w.cols[1]) // 2
                a = Word(w.cols)
                b = Word(w.cols)
                a.cols[1] = w.cols[1][:k]
                b.cols[1] = w.cols[1][k:]
                a.parent = w.parent
                b.parent = a
                b.cols[7] = "aux"
                repl[id(w)] = a
                toks.append((w.cols[1], [a, b]))
            else:
                toks.append((mwt, ws))
        s.tokens = toks
        resolve(s, repl)
        relink(s)
    return sentences


def split_tokens(sentences, rng, rate):
    for s in sentences:
        link_by_object(s)
        toks = []
        repl = {}
        for mwt, ws in s.tokens:
            w = ws[0]
            if mwt is None and len(w.cols[1]) >= 4 and rng.random() < rate:
                k = rng.randrange(1, len(w.cols[1]))
                a = Word(w.cols)
                b = Word(w.cols)
                a.cols[1] = w.cols[1][:k]
                b.cols[1] = w.cols[1][k:]
                a.parent = w.parent
                b.parent = a
                b.cols[7] = "goeswith"
                repl[id(w)] = a
                toks.append((None, [a]))
                toks.append((None, [b]))
            else:
                toks.append((mwt, ws))
        s.tokens = toks
        resolve(s, repl)
        relink(s)
    return sentences


def merge_tokens(sentences, rng, rate):
    for s in sentences:
        link_by_object(s)
        toks = []
        repl = {}
        i = 0
        while i < len(s.tokens):
            mwt, ws = s.tokens[i]
            nxt = s.tokens[i + 1] if i + 1 < len(s.tokens) else None
            # only head-dependent neighbours are merged, so no cycle can appear
            if (mwt is None and nxt is not None and nxt[0] is None
                    and (ws[0].parent is nxt[1][0] or nxt[1][0].parent is ws[0])
                    and rng.random() < rate):
                a, b = ws[0], nxt[1][0]
                m = Word(a.cols)
                m.cols[1] = a.cols[1] + b.cols[1]
                if a.parent is b:
                    m.parent = b.parent
                else:
                    m.parent = a.parent
                repl[id(a)] = m
                repl[id(b)] = m
                toks.append((None, [m]))
                i += 2
            else:
                toks.append((mwt, ws))
                i += 1
        s.tokens = toks
        resolve(s, repl)
        # exactly one root
        words = s.words()
        roots = [w for w in words if w.parent is None]
        for r in roots[1:]:
            r.parent = roots[0]
        relink(s)
    return sentences


def alter_comments_and_misc(sentences):
    for s in sentences:
        s.comments = [c + " (edited)" for c in s.comments] + ["# note = system output"]
        for w in s.words():
            w.cols[9] = "SpaceAfter=No" if w.cols[9] == "_" else "_"
    return sentences


def underscore_lemmas(sentences, every):
    n = 0
    for s in sentences:
        for w in s.words():
            n += 1
            if n % every == 0:
                w.cols[2] = "_"
    return sentences


def flip_content_functional(sentences, rng, rate):
    """Relabels content deprels as functional ones and vice versa."""
    swap = {"obl": "case", "nsubj": "det", "obj": "mark", "amod": "det", "advmod": "cc",
            "case": "nmod", "aux": "advmod", "aux:clitic": "obl", "cc": "conj", "det": "amod",
            "mark": "advcl", "cop": "obj"}
    for s in sentences:
        for w in s.words():
            if w.cols[7] in swap and rng.random() < rate:
                w.cols[7] = swap[w.cols[7]]
    return sentences


def mixed(sentences, rng):
    sentences = corrupt_column(sentences, rng, 3, 0.1, UPOS)
    sentences = corrupt_column(sentences, rng, 2, 0.1)
    sentences = corrupt_feats(sentences, rng, 0.1)
    sentences = corrupt_column(sentences, rng, 7, 0.1, DEPRELS)
    sentences = corrupt_heads(sentences, rng, 0.1)
    sentences = split_tokens(sentences, rng, 0.05)
    sentences = merge_tokens(sentences, rng, 0.05)
    sentences = introduce_mwts(sentences, rng, 0.05)
    sentences = split_sentences(sentences, rng, 0.2)
    return sentences


def build_cases(gold):
    def g():
        return copy.deepcopy(gold)

    cases = [
        ("identity", None, lambda: g()),
        ("upos_corrupt", None, lambda: corrupt_column(g(), random.Random(1), 3, 0.2, UPOS)),
        ("xpos_corrupt", None, lambda: corrupt_column(g(), random.Random(2), 4, 0.2)),
        ("feats_corrupt", None, lambda: corrupt_feats(g(), random.Random(3), 0.3)),
        ("feats_shuffled", None, lambda: shuffle_feats(g(), random.Random(4))),
        ("feats_non_universal", None, lambda: change_non_universal_feats(g(), random.Random(5))),
        ("lemma_corrupt", None, lambda: corrupt_column(g(), random.Random(6), 2, 0.25)),
        ("head_corrupt", None, lambda: corrupt_heads(g(), random.Random(7), 0.25)),
        ("deprel_corrupt", None, lambda: corrupt_column(g(), random.Random(8), 7, 0.25, DEPRELS)),
        ("deprel_subtypes_stripped", None, lambda: strip_subtypes(g())),
        ("deprel_subtypes_changed", None, lambda: change_subtypes(g())),
        ("content_functional_flip", None, lambda: flip_content_functional(g(), random.Random(9), 0.4)),
        ("merged_sentences", None, lambda: merge_sentences(g())),
        ("split_sentences", None, lambda: split_sentences(g(), random.Random(10), 0.5)),
        ("mwt_collapsed", None, lambda: collapse_mwts(g())),
        ("mwt_unpacked", None, lambda: unpack_mwts(g())),
        ("mwt_introduced", None, lambda: introduce_mwts(g(), random.Random(11), 0.2)),
        ("tokens_split", None, lambda: split_tokens(g(), random.Random(12), 0.2)),
        ("tokens_merged", None, lambda: merge_tokens(g(), random.Random(13), 0.2)),
        ("comments_misc_edited", None, lambda: alter_comments_and_misc(g())),
        ("gold_lemma_wildcard", "wildcard", lambda: corrupt_column(g(), random.Random(14), 2, 0.3)),
        ("mixed_a", None, lambda: mixed(g(), random.Random(100))),
        ("mixed_b", None, lambda: mixed(g(), random.Random(200))),
        ("mixed_c", None, lambda: mixed(g(), random.Random(300))),
        ("mixed_collapsed", None, lambda: mixed(collapse_mwts(g()), random.Random(400))),
    ]
    return cases


def score(ev, gold_path, sys_path):
    gold_ud = ev.load_conllu_file(gold_path)
    sys_ud = ev.load_conllu_file(sys_path)
    res = ev.evaluate(gold_ud, sys_ud)
    out = {}
    for metric, s in res.items():
        out[metric] = {
            "correct": s.correct,
            "gold_total": s.gold_total,
            "system_total": s.system_total,
            "aligned_total": s.aligned_total,
            "precision": s.precision,
            "recall": s.recall,
            "f1": s.f1,
            "aligned_accuracy": s.aligned_accuracy,
        }
    return out


def main():
    script, gold_path, out_dir = sys.argv[1:4]
    spec = importlib.util.spec_from_file_location("conll18_ud_eval", script)
    ev = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(ev)

    os.makedirs(out_dir, exist_ok=True)
    gold = read(gold_path)
    write(gold, os.path.join(out_dir, "gold.conllu"))
    wildcard = underscore_lemmas(copy.deepcopy(gold), 4)
    write(wildcard, os.path.join(out_dir, "gold_wildcard.conllu"))

    manifest = []
    for name, gold_kind, make in build_cases(gold):
        gfile = "gold_wildcard.conllu" if gold_kind == "wildcard" else "gold.conllu"
        sfile = f"{name}.system.conllu"
        write(make(), os.path.join(out_dir, sfile))
        expected = score(ev, os.path.join(out_dir, gfile), os.path.join(out_dir, sfile))
        manifest.append({"name": name, "gold": gfile, "system": sfile, "expected": expected})

    # raw-text mismatch: the reference refuses to score it
    bad = copy.deepcopy(gold)
    w = bad[2].words()[3]
    w.cols[1] = w.cols[1] + "x"
    write(bad, os.path.join(out_dir, "text_mismatch.system.conllu"))
    try:
        score(ev, os.path.join(out_dir, "gold.conllu"), os.path.join(out_dir, "text_mismatch.system.conllu"))
        raise SystemExit("expected the reference to reject text_mismatch")
    except ev.UDError:
        pass

    with open(os.path.join(out_dir, "expected.json"), "w", encoding="utf-8") as f:
        json.dump({"cases": manifest}, f, indent=1, sort_keys=True)
    print(f"wrote {len(manifest)} cases to {out_dir}")


if __name__ == "__main__":
    main()
