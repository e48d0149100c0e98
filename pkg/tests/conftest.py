from itertools import permutations

import numpy as np
import pytest

from hklab.exterior import perm_sign, two_form_to_matrix


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return philox(20240611)


def naive_wedge(a, b):
    """Antisymmetrised tensor sum over all index permutations of (0,1,2,3)."""
    A, B = two_form_to_matrix(a), two_form_to_matrix(b)
    total = 0.0
    for p in permutations(range(4)):
        total += perm_sign(p) * A[p[0], p[1]] * B[p[2], p[3]]
    return total / 4.0


# criterion number -> (title, "PASS"/"FAIL"), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, status = ACCEPTANCE[n]
        terminalreporter.write_line(f"{status} criterion {n}: {title}")
