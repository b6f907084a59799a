#!/usr/bin/env python3
"""Generates tests/data/metric_oracle.json.

Reference implementations of cumulative BLEU-4 and ROUGE-W written directly
from the published metric definitions, kept independent of the C++ code they
check. Regenerate with:  python3 tools/gen_metric_oracle.py
"""

import json
import math
import pathlib
from collections import Counter

EPSILON = 1e-9
ALPHA = 1.2


def tokenize(text: str):
    cleaned = []
    for ch in text.lower():
        cleaned.append(ch if ch.isalnum() or ch == "'" else " ")
    return "".join(cleaned).split()


def ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate, references):
    c = len(candidate)
    if c == 0:
        raise ValueError("empty candidate")
    # Closest reference length, ties to the shorter reference.
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)

    log_precision = 0.0
    for n in range(1, 5):
        total = max(c - n + 1, 0)
        if total == 0:
            precision = EPSILON
        else:
            counts = ngrams(candidate, n)
            clipped = 0
            for gram, count in counts.items():
                best = max(ngrams(ref, n).get(gram, 0) for ref in references)
                clipped += min(count, best)
            if clipped == 0:
                if c >= 4:
                    return 0.0
                precision = EPSILON
            else:
                precision = clipped / total
        log_precision += 0.25 * math.log(precision)
    return brevity * math.exp(log_precision)


def rouge_w(candidate, reference, alpha=ALPHA):
    m, n = len(reference), len(candidate)
    if m == 0 or n == 0:
        raise ValueError("empty input")
    f = lambda k: k**alpha
    f_inv = lambda t: t ** (1.0 / alpha)
    score = [[0.0] * (n + 1) for _ in range(m + 1)]
    run = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if reference[i - 1] == candidate[j - 1]:
                k = run[i - 1][j - 1]
                score[i][j] = score[i - 1][j - 1] + f(k + 1) - f(k)
                run[i][j] = k + 1
            else:
                score[i][j] = max(score[i - 1][j], score[i][j - 1])
                run[i][j] = 0
    wlcs = score[m][n]
    if wlcs <= 0.0:
        return 0.0
    recall = f_inv(wlcs / f(m))
    precision = f_inv(wlcs / f(n))
    if recall + precision == 0.0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)


PAIRS = [
    # (candidate, [references])
    ("Traffic light is red on ego's lane, so ego stops",
     ["Traffic light is red on ego's lane, so ego stops"]),
    ("quartz lamp violet", ["gnome bucket marsh wren"]),
    ("the cat sat", ["the cat sat down"]),
    ("a b c d", ["a b x d"]),
    ("Traffic light is not green on ego's lane, so ego stops",
     ["Traffic light is red on ego's lane, so ego stops"]),
    ("Vehicle is moving on ego's lane, so ego moves",
     ["A vehicle is moving on ego's lane, so ego keeps moving"]),
    ("A vehicle stopped on ego's lane, so ego stops",
     ["A vehicle stopped on ego's lane and outgoing lane is free, so ego moves to the right lane"]),
    ("If ego must move straight, the following should be happening: road is free on ego's lane",
     ["If ego must move straight, the road should be free on ego's lane"]),
    ("Ego's next goal is to move to the right lane, so ego moves to the left lane",
     ["Ego plans a right lane change, so ego moves to the left lane"]),
    ("road is free on ego's lane; the traffic light is green on ego's lane",
     ["the traffic light is green on ego's lane; road is free on ego's lane"]),
    ("A pedestrian is crossing ego's lane, so ego stops",
     ["A pedestrian is crossing ego's lane, so ego stops",
      "Ego stops because a pedestrian is crossing"]),
    ("ego moves", ["ego moves"]),
    ("ego stops now", ["ego stops", "ego stops right now"]),
    ("A bus is braking on ego's lane, so ego stops",
     ["A bus stopped on ego's lane, so ego stops"]),
    ("There is an agent on ego's lane, so ego moves straight",
     ["Traffic is flowing on ego's lane, so ego moves"]),
    ("the quick brown fox jumps over the lazy dog",
     ["the quick brown fox jumped over the lazy dog"]),
    ("so ego stops", ["so ego moves"]),
    ("If ego must stop, the following should be happening: a vehicle stopped on ego's lane",
     ["a vehicle stopped on ego's lane means ego must stop"]),
    ("An agent is braking or stopped on ego's lane, so ego stops",
     ["An agent has stopped on ego's lane, so ego stops",
      "An agent is braking on ego's lane, so ego stops"]),
    ("Road is free on ego's lane, so ego moves",
     ["Road was free on ego's lane, so ego moved"]),
]


def main():
    cases = []
    for candidate_text, reference_texts in PAIRS:
        candidate = tokenize(candidate_text)
        references = [tokenize(ref) for ref in reference_texts]
        cases.append(
            {
                "candidate": candidate_text,
                "references": reference_texts,
                "candidate_tokens": candidate,
                "reference_tokens": references,
                "bleu4": bleu4(candidate, references),
                "rouge_w": rouge_w(candidate, references[0]),
            }
        )
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "metric_oracle.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"alpha": ALPHA, "cases": cases}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()
