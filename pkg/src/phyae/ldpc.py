"""Rate-1/2 LDPC: alist parsing/writing, systematic encoding via GF(2)
elimination, and sum-product (tanh rule) belief-propagation decoding.

LLR sign convention: positive means bit 0 more likely.  Channel LLRs are
clamped to [-30, 30] and internal messages to [-25, 25] so tanh never
saturates to exactly +-1.

Decoding is vectorized across codewords: messages live in (n_edges, batch)
arrays, variable-node sums use segmented reductions over a check-major edge
list, and check-node leave-one-out tanh products use prefix/suffix products
within degree groups (no division, so zero messages are safe).

The shipped default code is a (1024, 512) check-regular matrix built once by
seeded progressive edge growth and stored as codes/peg_1024_512.alist.
"""

from importlib import resources

import numpy as np

from .errors import FormatError
from .util import rng_stream

LLR_CLAMP = 30.0
MSG_CLAMP = 25.0


class LdpcCode:
    """Sparse parity-check matrix with cached edge lists and systematic form."""

    def __init__(self, var_neighbors: list, n_checks: int):
        self.n = len(var_neighbors)
        self.m = n_checks
        self.var_neighbors = [np.asarray(sorted(v), dtype=np.int64) for v in var_neighbors]
        check_lists = [[] for _ in range(n_checks)]
        for v, checks in enumerate(self.var_neighbors):
            if len(checks) < 2:
                raise FormatError(f"variable {v} has degree {len(checks)} (< 2)")
            if len(set(checks.tolist())) != len(checks):
                raise FormatError(f"variable {v} repeats a check index")
            for c in checks:
                if not 0 <= c < n_checks:
                    raise FormatError(f"variable {v} lists check {c} out of range")
                check_lists[int(c)].append(v)
        for c, vs in enumerate(check_lists):
            if len(vs) < 2:
                raise FormatError(f"check {c} has degree {len(vs)} (< 2)")
        self.check_neighbors = [np.asarray(v, dtype=np.int64) for v in check_lists]

        # check-major edge list
        self.edge_var = np.concatenate(self.check_neighbors)
        check_degrees = np.array([len(v) for v in self.check_neighbors])
        self.check_ptr = np.concatenate([[0], np.cumsum(check_degrees)])
        self.n_edges = int(self.edge_var.size)
        # var-major traversal of the same edges
        self.var_order = np.argsort(self.edge_var, kind="stable")
        var_degrees = np.bincount(self.edge_var, minlength=self.n)
        self.var_ptr = np.concatenate([[0], np.cumsum(var_degrees)])
        # degree groups: (degree, (num_checks, degree) edge-index matrix)
        self.degree_groups = []
        for d in np.unique(check_degrees):
            rows = np.nonzero(check_degrees == d)[0]
            idx = self.check_ptr[rows][:, None] + np.arange(d)[None, :]
            self.degree_groups.append((int(d), idx))

        self._systematic = None

    # -- systematic form ----------------------------------------------------
    def dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for c, vs in enumerate(self.check_neighbors):
            h[c, vs] = 1
        return h

    def _systematize(self):
        """Row-reduce H over GF(2); record pivot (parity) and free (info)
        columns so encoding is c[info] = u, c[pivots] = A u."""
        h = self.dense()
        m, n = h.shape
        pivots = []
        r = 0
        for c in range(n):
            if r == m:
                break
            hot = np.nonzero(h[r:, c])[0]
            if hot.size == 0:
                continue
            pr = r + hot[0]
            if pr != r:
                h[[r, pr]] = h[[pr, r]]
            mask = h[:, c].astype(bool)
            mask[r] = False
            h[mask] ^= h[r]
            pivots.append(c)
            r += 1
        if r < m:
            raise FormatError(f"parity matrix is rank-deficient (rank {r} < {m})")
        pivots = np.array(pivots)
        info = np.setdiff1d(np.arange(n), pivots)
        a = h[:, info]  # parity generator: c[pivots] = A @ u mod 2
        self._systematic = (info, pivots, a)

    @property
    def k(self) -> int:
        return self.n - self.m

    def systematic_form(self):
        if self._systematic is None:
            self._systematize()
        return self._systematic

    @property
    def info_positions(self) -> np.ndarray:
        return self.systematic_form()[0]


def encode(info_bits, code: LdpcCode) -> np.ndarray:
    """Systematic encoding; accepts (k,) or (B, k), returns matching shape."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    single = info_bits.ndim == 1
    u = info_bits.reshape(-1, code.k) if not single else info_bits[None, :]
    if u.shape[1] != code.k:
        raise ValueError(f"info length {u.shape[1]} != k = {code.k}")
    info, pivots, a = code.systematic_form()
    parity = (u.astype(np.float64) @ a.T.astype(np.float64)) % 2
    c = np.zeros((u.shape[0], code.n), dtype=np.uint8)
    c[:, info] = u
    c[:, pivots] = parity.astype(np.uint8)
    return c[0] if single else c


def syndrome_check(bits, code: LdpcCode) -> bool | np.ndarray:
    """True iff H b = 0 over GF(2); accepts (n,) or (B, n)."""
    bits = np.asarray(bits, dtype=np.uint8)
    single = bits.ndim == 1
    b = bits[None, :] if single else bits
    if b.shape[1] != code.n:
        raise ValueError(f"word length {b.shape[1]} != n = {code.n}")
    per_edge = b[:, code.edge_var]
    sums = np.add.reduceat(per_edge.astype(np.int64), code.check_ptr[:-1], axis=1)
    ok = ~np.any(sums % 2, axis=1)
    return bool(ok[0]) if single else ok


def check_node_messages(v2c, code: LdpcCode) -> np.ndarray:
    """Tanh-rule check update: leave-one-out products via prefix/suffix
    passes within each degree group (no division).  Message signs are
    invariant under uniform positive scaling of the inputs."""
    t = np.tanh(0.5 * np.clip(v2c, -MSG_CLAMP, MSG_CLAMP))
    out = np.empty_like(t)
    for d, idx in code.degree_groups:
        td = t[idx]  # (num, d, ...)
        pre = np.ones_like(td)
        suf = np.ones_like(td)
        for j in range(1, d):
            pre[:, j] = pre[:, j - 1] * td[:, j - 1]
        for j in range(d - 2, -1, -1):
            suf[:, j] = suf[:, j + 1] * td[:, j + 1]
        prod = np.clip(pre * suf, -1 + 1e-15, 1 - 1e-15)
        out[idx] = np.clip(2.0 * np.arctanh(prod), -MSG_CLAMP, MSG_CLAMP)
    return out


def bp_decode_many(llrs, code: LdpcCode, max_iters: int = 50):
    """Sum-product decoding of a batch of LLR rows (B, n).

    Returns (bits (B, n) uint8, converged (B,) bool, iterations (B,) int).
    Converged blocks drop out of the message arrays as they finish.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 2 or llrs.shape[1] != code.n:
        raise ValueError(f"LLR batch must be (B, {code.n}), got {llrs.shape}")
    batch = llrs.shape[0]
    llr_var = np.clip(llrs.T, -LLR_CLAMP, LLR_CLAMP)  # (n, B)

    bits_out = np.zeros((code.n, batch), dtype=np.uint8)
    converged = np.zeros(batch, dtype=bool)
    iters_out = np.full(batch, max_iters, dtype=np.int64)

    active = np.arange(batch)
    llr_act = llr_var
    c2v = np.zeros((code.n_edges, active.size))

    def var_totals(messages):
        ordered = messages[code.var_order]
        return np.add.reduceat(ordered, code.var_ptr[:-1], axis=0)

    for it in range(1, max_iters + 1):
        totals = var_totals(c2v)  # (n, B_active)
        v2c = llr_act[code.edge_var] + totals[code.edge_var] - c2v
        c2v = check_node_messages(v2c, code)
        posterior = llr_act + var_totals(c2v)
        bits = (posterior < 0).astype(np.uint8)
        per_edge = bits[code.edge_var]
        syn = np.add.reduceat(per_edge.astype(np.int64), code.check_ptr[:-1], axis=0) % 2
        ok = ~np.any(syn, axis=0)

        bits_out[:, active] = bits
        if np.any(ok):
            done = active[ok]
            converged[done] = True
            iters_out[done] = it
            keep = ~ok
            if not np.any(keep):
                return bits_out.T, converged, iters_out
            active = active[keep]
            llr_act = llr_act[:, keep]
            c2v = c2v[:, keep]
    return bits_out.T, converged, iters_out


def bp_decode(llr, code: LdpcCode, max_iters: int = 50):
    """Single-word sum-product decode: (bits, converged flag, iterations)."""
    bits, conv, iters = bp_decode_many(np.asarray(llr)[None, :], code, max_iters)
    return bits[0], bool(conv[0]), int(iters[0])


# ---------------------------------------------------------------------------
# alist interchange format
# ---------------------------------------------------------------------------

def load_alist(text: str) -> LdpcCode:
    """Parse standard alist text (padded or unpadded index lists)."""
    lines = text.splitlines()

    def ints(line_no: int, expect: int | None = None):
        if line_no >= len(lines):
            raise FormatError(f"alist truncated at line {line_no + 1}")
        try:
            values = [int(tok) for tok in lines[line_no].split()]
        except ValueError:
            raise FormatError(f"alist line {line_no + 1}: non-integer token") from None
        if expect is not None and len(values) != expect:
            raise FormatError(
                f"alist line {line_no + 1}: expected {expect} values, got {len(values)}")
        return values

    n, m = ints(0, 2)
    if n <= 0 or m <= 0:
        raise FormatError("alist line 1: dimensions must be positive")
    max_col, max_row = ints(1, 2)
    col_deg = ints(2, n)
    row_deg = ints(3, m)
    if max(col_deg) != max_col or max(row_deg) != max_row:
        raise FormatError("alist lines 2-4: stated maximum degrees do not match lists")

    var_neighbors = []
    for j in range(n):
        vals = [v for v in ints(4 + j) if v != 0]
        if len(vals) != col_deg[j]:
            raise FormatError(
                f"alist line {5 + j}: variable {j + 1} lists {len(vals)} checks, "
                f"degree says {col_deg[j]}")
        for v in vals:
            if not 1 <= v <= m:
                raise FormatError(f"alist line {5 + j}: check index {v} out of range 1..{m}")
        var_neighbors.append([v - 1 for v in vals])

    for i in range(m):
        vals = [v for v in ints(4 + n + i) if v != 0]
        if len(vals) != row_deg[i]:
            raise FormatError(
                f"alist line {5 + n + i}: check {i + 1} lists {len(vals)} variables, "
                f"degree says {row_deg[i]}")
        for v in vals:
            if not 1 <= v <= n:
                raise FormatError(
                    f"alist line {5 + n + i}: variable index {v} out of range 1..{n}")
            if i not in var_neighbors[v - 1]:
                raise FormatError(
                    f"alist line {5 + n + i}: edge ({i + 1}, {v}) missing from column lists")

    return LdpcCode(var_neighbors, m)


def write_alist(code: LdpcCode) -> str:
    col_deg = [len(v) for v in code.var_neighbors]
    row_deg = [len(v) for v in code.check_neighbors]
    lines = [
        f"{code.n} {code.m}",
        f"{max(col_deg)} {max(row_deg)}",
        " ".join(str(d) for d in col_deg),
        " ".join(str(d) for d in row_deg),
    ]
    for v in code.var_neighbors:
        lines.append(" ".join(str(c + 1) for c in v))
    for c in code.check_neighbors:
        lines.append(" ".join(str(v + 1) for v in c))
    return "\n".join(lines) + "\n"


def read_alist(path) -> LdpcCode:
    with open(path) as f:
        return load_alist(f.read())


def default_code_path() -> str:
    """Path of the shipped (1024, 512) rate-1/2 code."""
    return str(resources.files("phyae").joinpath("codes/peg_1024_512.alist"))


# ---------------------------------------------------------------------------
# Progressive edge growth construction
# ---------------------------------------------------------------------------

def peg_construct(n_vars: int, n_checks: int, var_degree: int = 3,
                  seed: int = 0) -> LdpcCode:
    """Check-regular PEG construction.

    Each new edge goes to the most distant check (BFS in the current graph)
    among checks below the regular-degree cap, preferring low degree; ties
    break by a seeded draw.  With n_vars*var_degree divisible by n_checks the
    result is exactly check-regular.
    """
    total = n_vars * var_degree
    if total % n_checks != 0:
        raise ValueError("var_degree * n_vars must be divisible by n_checks")
    cap = total // n_checks
    rng = rng_stream(seed, "peg", n_vars, n_checks, var_degree)
    adj_v = [[] for _ in range(n_vars)]
    adj_c = [[] for _ in range(n_checks)]
    degree = np.zeros(n_checks, dtype=np.int64)

    def bfs_depths(v0):
        """Distance from variable v0 to every check (-1 = unreached)."""
        depth = np.full(n_checks, -1, dtype=np.int64)
        seen_v = np.zeros(n_vars, dtype=bool)
        seen_v[v0] = True
        frontier = [v0]
        level = 0
        while frontier:
            next_checks = []
            for v in frontier:
                for c in adj_v[v]:
                    if depth[c] < 0:
                        depth[c] = level
                        next_checks.append(c)
            frontier = []
            for c in next_checks:
                for v in adj_c[c]:
                    if not seen_v[v]:
                        seen_v[v] = True
                        frontier.append(v)
            level += 1
        return depth

    for v in range(n_vars):
        for t in range(var_degree):
            open_checks = degree < cap
            open_checks[adj_v[v]] = False
            candidates = np.nonzero(open_checks)[0]
            if candidates.size == 0:
                raise RuntimeError("PEG ran out of open checks; try another seed")
            if t > 0:
                depth = bfs_depths(v)[candidates]
                # unreached (-1) counts as infinitely far
                score = np.where(depth < 0, np.iinfo(np.int64).max, depth)
                candidates = candidates[score == score.max()]
            deg = degree[candidates]
            candidates = candidates[deg == deg.min()]
            c = int(rng.choice(candidates))
            adj_v[v].append(c)
            adj_c[c].append(v)
            degree[c] += 1

    return LdpcCode(adj_v, n_checks)
