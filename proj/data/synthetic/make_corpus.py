"""Regenerates problems.jsonl and oracle.json for the bundled synthetic corpus.

Three skill clusters of four problems. The scripted oracle repairs a problem
only when an in-context pair comes from the same cluster, so a good pair list
must cover every cluster.
"""
import json
import pathlib

HERE = pathlib.Path(__file__).parent

PROBLEMS = [
    # cluster, id, description, body, inputs, difficulty
    ("ints", "sum_ints", "Print the sum of the whitespace separated integers.",
     "print(sum(int(x) for x in s.split()))", ["1 2 3", "10 -4", "7"], "easy"),
    ("ints", "max_int", "Print the largest of the whitespace separated integers.",
     "print(max(int(x) for x in s.split()))", ["1 9 3", "-5 -2", "4"], "easy"),
    ("ints", "min_int", "Print the smallest of the whitespace separated integers.",
     "print(min(int(x) for x in s.split()))", ["1 9 3", "-5 -2", "4"], "easy"),
    ("ints", "product_ints", "Print the product of the whitespace separated integers.",
     "import math\n    print(math.prod(int(x) for x in s.split()))", ["1 2 3", "10 -4", "7"], "medium"),
    ("strings", "reverse", "Print the input line reversed.",
     "print(s.strip()[::-1])", ["abc", "racecar", "hello world"], "easy"),
    ("strings", "upper", "Print the input line in upper case.",
     "print(s.strip().upper())", ["abc", "MiXeD", "x y"], "easy"),
    ("strings", "vowels", "Print how many vowels (aeiou, any case) the input has.",
     "print(sum(c in 'aeiouAEIOU' for c in s))", ["banana", "SKY", "Education"], "medium"),
    ("strings", "palindrome", "Print YES if the stripped input reads the same backwards, else NO.",
     "t = s.strip()\n    print('YES' if t == t[::-1] else 'NO')", ["racecar", "ab", "a"], "medium"),
    ("lines", "count_lines", "Print the number of non-empty lines.",
     "print(sum(1 for l in s.splitlines() if l.strip()))", ["a\nb\n", "x\n\ny\nz\n", "\n"], "easy"),
    ("lines", "sort_lines", "Print the non-empty lines in sorted order.",
     "print('\\n'.join(sorted(l for l in s.splitlines() if l.strip())))",
     ["b\na\nc\n", "z\ny\n", "k\n"], "medium"),
    ("lines", "unique_lines", "Print the distinct non-empty lines in first-seen order.",
     "seen = []\n    for l in s.splitlines():\n        if l.strip() and l not in seen:\n            seen.append(l)\n    print('\\n'.join(seen))",
     ["a\nb\na\n", "x\nx\n", "p\nq\n"], "hard"),
    ("lines", "longest_line", "Print the length of the longest line.",
     "print(max((len(l) for l in s.splitlines()), default=0))", ["a\nabc\nab\n", "xyz\n", "aaaa\nb\n"], "hard"),
]

WRONG = "```python\ndef solve(s: str):\n    print(s)\n```"


def code(body):
    return "def solve(s: str):\n    " + body + "\n"


def expected(body, data):
    import contextlib
    import io
    ns = {}
    exec(code(body), ns)
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        ns["solve"](data)
    return buf.getvalue()


def main():
    with open(HERE / "problems.jsonl", "w", encoding="utf-8") as f:
        for cluster, pid, desc, body, inputs, difficulty in PROBLEMS:
            tests = [{"input": i, "expected_output": expected(body, i)} for i in inputs]
            f.write(json.dumps({"id": pid, "description": desc, "tests": tests,
                                "difficulty": difficulty, "categories": [cluster],
                                "source": "synthetic"}) + "\n")
    clusters = {}
    for cluster, pid, *_ in PROBLEMS:
        clusters.setdefault(cluster, []).append(pid)
    rules = []
    for cluster, pid, _, body, *_ in PROBLEMS:
        fixed = "```python\n" + code(body) + "```"
        rules.append({"purpose": "pairgen", "problem": pid, "response": fixed})
        rules.append({"purpose": ["matrix", "aupair", "random_pairs"], "problem": pid,
                      "pair_problem": clusters[cluster], "response": fixed})
    with open(HERE / "oracle.json", "w", encoding="utf-8") as f:
        json.dump({"default": WRONG, "rules": rules}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
