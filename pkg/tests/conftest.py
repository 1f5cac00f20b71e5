import numpy as np
import pytest

# Reference arrays, '*' = star, '.' = null mirror entry.

EQ3 = """\
* * 1 2
* 1 * 3
* 2 3 *
1 * * 4
2 * 4 *
3 4 * *"""

# mirror part | sub-array 1 | sub-array 2
EQ4 = """\
* . | 5 6 | 1 2
. . | * 1 | * 3
. . | * 2 | 3 *
. . | 1 * | * 4
. . | 2 * | 4 *
. * | 3 4 | 7 8"""

# outer mn(2,1) rows x inner mn(3,1) rows; blocks [[C+3, C], [C, C+6]]
FIG4 = """\
* . | * 4 5 | * 1 2
* . | 4 * 6 | 1 * 3
* . | 5 6 * | 2 3 *
. * | * 1 2 | * 7 8
. * | 1 * 3 | 7 * 9
. * | 2 3 * | 8 9 *"""


def tokens(text):
    return [ln.split() for ln in text.splitlines()]


def cells(rows):
    return np.array([[0 if c == "*" else int(c) for c in r] for r in rows], dtype=np.int64)


def split_hpda(text):
    """(a0 bool array, [sub-arrays]) from a '|'-separated fixture."""
    parts = [[p.split() for p in ln.split("|")] for ln in text.splitlines()]
    a0 = np.array([[c == "*" for c in row[0]] for row in parts])
    subs = [cells([row[i] for row in parts]) for i in range(1, len(parts[0]))]
    return a0, subs


@pytest.fixture
def eq3():
    return cells(tokens(EQ3))


@pytest.fixture
def eq4():
    return split_hpda(EQ4)


@pytest.fixture
def fig4():
    return split_hpda(FIG4)


def brute_pda_ok(a):
    """Direct scan of the PDA conditions, written independently of the library verifier."""
    F, K = a.shape
    z = sum(1 for j in range(F) if a[j, 0] == 0)
    for k in range(K):
        if sum(1 for j in range(F) if a[j, k] == 0) != z:
            return False
    for j1 in range(F):
        for k1 in range(K):
            for j2 in range(F):
                for k2 in range(K):
                    if (j1, k1) == (j2, k2) or a[j1, k1] == 0 or a[j1, k1] != a[j2, k2]:
                        continue
                    if j1 == j2 or k1 == k2:
                        return False
                    if a[j1, k2] != 0 or a[j2, k1] != 0:
                        return False
    return True


# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
