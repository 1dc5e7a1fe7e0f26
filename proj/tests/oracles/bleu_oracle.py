#!/usr/bin/env python3
"""Independent BLEU-4 oracle used to freeze expected values into the C++ tests.

Computes sentence-level BLEU-4 over token sequences with exact Fraction
arithmetic for the n-gram precisions, then evaluates

    BLEU = BP * exp(sum_{n=1..4} 0.25 * ln(p_n))

with 50-digit mpmath precision. Precision rules:
  * p_n = clipped_matches / total candidate n-grams
  * p_1 == 0  =>  BLEU = 0
  * n >= 2 with zero matches => add-one smoothing: (m+1)/(t+1)
  * BP = 1 if c > r else exp(1 - r/c), with c, r = token counts

Run `python3 bleu_oracle.py` to print the frozen table used by
test_metrics.cpp. This file is test tooling only; it never touches the
library implementation.
"""

from collections import Counter
from fractions import Fraction

from mpmath import mp, mpf, exp, log

mp.dps = 50

FIXTURES = [
    # (name, candidate tokens, reference tokens)
    ("identity3", ["return", "x", ";"], ["return", "x", ";"]),
    ("sub_mid", ["return", "x", ";"], ["return", "y", ";"]),
    ("sub_op", ["x", "=", "y", "+", "1", ";"], ["x", "=", "y", "-", "1", ";"]),
    ("identity4", ["a", "b", "c", "d"], ["a", "b", "c", "d"]),
    ("tail_sub", ["a", "b", "c", "d", "e"], ["a", "b", "c", "d", "f"]),
    ("single_match", ["a"], ["a"]),
    ("short_cand", ["a"], ["a", "b", "c"]),
    ("swapped", ["a", "b"], ["b", "a"]),
    ("clipping", ["a", "a", "a", "a"], ["a", "a"]),
    ("cmp_op", ["if", "(", "a", ">", "b", ")"], ["if", "(", "a", ">", "=", "b", ")"]),
    ("prefix_missing", ["x", ";"], ["return", "x", ";"]),
    ("num_sub", ["return", "x", "+", "1", ";"], ["return", "x", "+", "2", ";"]),
    ("arg_sub", ["foo", "(", "bar", ")"], ["foo", "(", "baz", ")"]),
    ("reversed3", ["a", "b", "c"], ["c", "b", "a"]),
    ("le_vs_lt", ["while", "(", "i", "<", "n", ")"], ["while", "(", "i", "<", "=", "n", ")"]),
    ("var_sub", ["y", "=", "0", ";"], ["x", "=", "0", ";"]),
    ("repeat_long_ref", ["a", "b", "a", "b"], ["a", "b", "a", "b", "a", "b"]),
    ("disjoint", ["z", "z", "z"], ["a", "b", "c"]),
    ("identity_null", ["return", "null", ";"], ["return", "null", ";"]),
    ("decl_sub", ["int", "i", "=", "0", ";"], ["int", "j", "=", "0", ";"]),
    ("long_mid_sub", ["a", "b", "c", "d", "e", "f", "g", "h"], ["a", "b", "c", "d", "x", "f", "g", "h"]),
    ("literal_identity", ["s", "=", '"a b"', ";"], ["s", "=", '"a b"', ";"]),
    ("literal_sub", ["s", "=", '"a b"', ";"], ["s", "=", '"a c"', ";"]),
]


def ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def precisions(cand, ref):
    ps = []
    for n in range(1, 5):
        cg = ngrams(cand, n)
        rg = ngrams(ref, n)
        total = max(len(cand) - n + 1, 0)
        matched = sum(min(c, rg[g]) for g, c in cg.items())
        if n == 1:
            ps.append(Fraction(matched, total) if total else Fraction(0))
        elif matched == 0:
            ps.append(Fraction(matched + 1, total + 1))
        else:
            ps.append(Fraction(matched, total))
    return ps


def bleu4(cand, ref):
    if not cand:
        return mpf(0)
    ps = precisions(cand, ref)
    if ps[0] == 0:
        return mpf(0)
    log_sum = sum(mpf("0.25") * log(mpf(p.numerator) / mpf(p.denominator)) for p in ps)
    c, r = len(cand), len(ref)
    bp = mpf(1) if c > r else exp(1 - mpf(r) / mpf(c))
    return bp * exp(log_sum)


def main():
    print("// generated by tests/oracles/bleu_oracle.py -- do not edit by hand")
    for name, cand, ref in FIXTURES:
        val = bleu4(cand, ref)
        ps = precisions(cand, ref) if cand else []
        detail = " ".join(f"p{i+1}={p.numerator}/{p.denominator}" for i, p in enumerate(ps))
        print(f"// {name}: {detail}")
        print(f'{{"{name}", {mp.nstr(val, 17)}}},')


if __name__ == "__main__":
    main()
