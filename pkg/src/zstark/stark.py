"""Prover and verifier for the lookup constraint system.

The protocol is a standard small STARK: commit to low-degree extensions
of the witness columns on a shifted coset (blowup 8), mix all
constraints into one composition polynomial with transcript challenges,
bind commitments to claimed values at an out-of-domain point via DEEP
quotients, and certify low degree with factor-2 FRI folds down to a
final polynomial of degree < 8.

Commitment trees pair each point x with -x in a single leaf, so one
authentication path yields both evaluations a FRI fold consumes.  With
committed FRI layers L, a verifier checks exactly L + 2 Merkle paths
per query (trace, composition, and one per intermediate layer).

Public columns (cell indices, payload values, outputs) are never part
of the DEEP combination: the verifier evaluates them at the
out-of-domain point itself by barycentric interpolation from the
statement, which is what makes a claimed-output flip detectable.

Everything the verifier does is recomputed from the proof bytes; no
challenge is trusted.  Rejections carry one of five reasons:

  BAD_LOOKUP_PATH    table openings malformed, misplaced, or unverifiable
  DEGREE_EXCEEDED    final FRI polynomial above the degree bound
  OOD_MISMATCH       out-of-domain constraint identity (or claimed
                     evaluations) inconsistent
  BAD_TRACE_OPENING  trace/composition query openings unverifiable
  FRI_FOLD_MISMATCH  folding chain or final polynomial inconsistent
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .air import (
    AirConfig,
    PublicStatement,
    TraceTable,
    check_trace,
    combine_constraints,
    constraint_set,
    payload_leaf_indices,
    public_column_arrays,
    public_columns,
    witness_columns,
)
from .commit import (
    DIGEST_SIZE,
    MerklePath,
    MerkleTree,
    Transcript,
    merkle_build,
    merkle_open,
    merkle_verify,
)
from .field import (
    GENERATOR,
    P,
    EvaluationDomain,
    f_add,
    f_inv,
    f_mul,
    f_pow,
    f_sub,
    horner,
    intt,
    intt_mat,
    inv_many,
    mod_sum_rows,
    ntt_mat,
    root_of_unity,
    v_add,
    v_inv,
    v_mul,
    v_pow,
    v_sub,
)

ACCEPT = "ACCEPT"
BAD_LOOKUP_PATH = "BAD_LOOKUP_PATH"
DEGREE_EXCEEDED = "DEGREE_EXCEEDED"
OOD_MISMATCH = "OOD_MISMATCH"
BAD_TRACE_OPENING = "BAD_TRACE_OPENING"
FRI_FOLD_MISMATCH = "FRI_FOLD_MISMATCH"

REJECT_REASONS = (BAD_LOOKUP_PATH, DEGREE_EXCEEDED, OOD_MISMATCH,
                  BAD_TRACE_OPENING, FRI_FOLD_MISMATCH)

_U64 = np.uint64
_MAGIC = b"ZSTK"
_VERSION = 1


@dataclass
class QueryOpening:
    index: int
    trace_path: MerklePath
    composition_path: MerklePath
    fri_paths: list[MerklePath]


@dataclass
class StarkProof:
    config: AirConfig
    statement: PublicStatement
    trace_root: bytes
    composition_root: bytes
    ood_point: int
    ood_public: list[int]
    ood_witness: list[int]
    ood_composition: int
    fri_roots: list[bytes]
    fri_final: list[int]
    openings: list[QueryOpening]

    def to_bytes(self) -> bytes:
        parts = [_MAGIC, struct.pack("<H", _VERSION), self.config.to_bytes(),
                 self.statement.to_bytes(), self.trace_root, self.composition_root,
                 struct.pack("<Q", self.ood_point),
                 struct.pack("<I", len(self.ood_public)), _u64s(self.ood_public),
                 struct.pack("<I", len(self.ood_witness)), _u64s(self.ood_witness),
                 struct.pack("<Q", self.ood_composition),
                 struct.pack("<B", len(self.fri_roots)), b"".join(self.fri_roots),
                 struct.pack("<B", len(self.fri_final)), _u64s(self.fri_final),
                 struct.pack("<I", len(self.openings))]
        for op in self.openings:
            parts.append(struct.pack("<I", op.index))
            parts.append(op.trace_path.to_bytes())
            parts.append(op.composition_path.to_bytes())
            parts.append(struct.pack("<B", len(op.fri_paths)))
            for path in op.fri_paths:
                parts.append(path.to_bytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "StarkProof":
        try:
            return cls._parse(buf)
        except (struct.error, IndexError) as exc:
            raise ValueError(f"truncated or corrupt proof: {exc}") from exc

    @classmethod
    def _parse(cls, buf: bytes) -> "StarkProof":
        if buf[:4] != _MAGIC:
            raise ValueError("not a proof file (bad magic)")
        (version,) = struct.unpack_from("<H", buf, 4)
        if version != _VERSION:
            raise ValueError(f"unsupported proof version {version}")
        cfg, off = AirConfig.read_from(buf, 6)
        statement, off = PublicStatement.read_from(buf, off)
        trace_root = bytes(buf[off:off + DIGEST_SIZE])
        comp_root = bytes(buf[off + 32:off + 64])
        off += 64
        (ood_point,) = struct.unpack_from("<Q", buf, off)
        off += 8
        ood_public, off = _read_u64s(buf, off)
        ood_witness, off = _read_u64s(buf, off)
        (ood_comp,) = struct.unpack_from("<Q", buf, off)
        off += 8
        (n_roots,) = struct.unpack_from("<B", buf, off)
        off += 1
        fri_roots = []
        for _ in range(n_roots):
            fri_roots.append(bytes(buf[off:off + DIGEST_SIZE]))
            off += DIGEST_SIZE
        (n_final,) = struct.unpack_from("<B", buf, off)
        off += 1
        fri_final = list(struct.unpack_from(f"<{n_final}Q", buf, off))
        off += 8 * n_final
        (n_open,) = struct.unpack_from("<I", buf, off)
        off += 4
        openings = []
        for _ in range(n_open):
            (index,) = struct.unpack_from("<I", buf, off)
            off += 4
            tp, off = MerklePath.read_from(buf, off)
            cp, off = MerklePath.read_from(buf, off)
            (n_fri,) = struct.unpack_from("<B", buf, off)
            off += 1
            fps = []
            for _ in range(n_fri):
                fp, off = MerklePath.read_from(buf, off)
                fps.append(fp)
            openings.append(QueryOpening(index, tp, cp, fps))
        if off != len(buf):
            raise ValueError(f"{len(buf) - off} trailing bytes after proof")
        return cls(cfg, statement, trace_root, comp_root, ood_point, ood_public,
                   ood_witness, ood_comp, fri_roots, fri_final, openings)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "StarkProof":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class VerificationResult:
    accepted: bool
    reason: str
    lookup_path_checks: int = 0
    query_path_checks: int = 0

    def __bool__(self) -> bool:
        return self.accepted


def _u64s(values) -> bytes:
    return struct.pack(f"<{len(values)}Q", *values)


def _read_u64s(buf: bytes, off: int) -> tuple[list[int], int]:
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    vals = list(struct.unpack_from(f"<{count}Q", buf, off))
    return vals, off + 8 * count


def _num_folds(cfg: AirConfig) -> int:
    return (cfg.rows // cfg.fri_final_degree).bit_length() - 1


def _committed_layers(cfg: AirConfig) -> int:
    return max(_num_folds(cfg) - 1, 0)


def _pair_tree(evals: np.ndarray) -> MerkleTree:
    """Merkle tree whose leaf k packs column values at k and k + N/2."""
    c, n = evals.shape
    half = n // 2
    stacked = np.concatenate([evals[:, :half], evals[:, half:]], axis=0)
    return merkle_build(stacked.T.tobytes(), item_size=2 * c * 8)


def _parse_pair(payload: bytes, c: int):
    arr = np.frombuffer(payload, dtype="<u8")
    if arr.shape[0] != 2 * c:
        raise ValueError("pair leaf has wrong width")
    return arr[:c], arr[c:]


def _horner_rows(coeffs: np.ndarray, z: int) -> list[int]:
    """Evaluate each row of a coefficient matrix at the scalar z."""
    zz = _U64(z)
    acc = np.zeros(coeffs.shape[0], dtype=_U64)
    for k in range(coeffs.shape[1] - 1, -1, -1):
        acc = v_add(v_mul(acc, zz), coeffs[:, k])
    return [int(x) for x in acc]


def _draw_ood_point(t: Transcript, n: int, lde_size: int) -> int:
    """Out-of-domain point, redrawn if it lands in either domain."""
    shift_pow = f_pow(GENERATOR, lde_size)
    while True:
        z = t.challenge_field()
        if f_pow(z, n) != 1 and f_pow(z, lde_size) != shift_pow:
            return z


def _transcript_for(cfg: AirConfig, statement: PublicStatement) -> Transcript:
    t = Transcript()
    t.absorb(b"config", cfg.to_bytes())
    t.absorb(b"statement", statement.to_bytes())
    return t


# ---------------------------------------------------------------------------
# Prover
# ---------------------------------------------------------------------------

def prove(trace: TraceTable, statement: PublicStatement,
          cfg: AirConfig | None = None, *, check: bool = True) -> StarkProof:
    """Produce a proof that the trace satisfies every constraint.

    With check=True (the default) an unsatisfied trace is refused.
    check=False exists for adversarial tests and produces proofs the
    verifier rejects.
    """
    cfg = cfg if cfg is not None else trace.cfg
    if cfg != trace.cfg:
        raise ValueError("config does not match the trace")
    if check:
        bad = check_trace(trace, statement)
        if bad:
            raise ValueError(f"trace violates constraints: {', '.join(bad)}")

    n = cfg.rows
    big_n = n * cfg.blowup
    names_w = witness_columns(cfg)
    names_p = public_columns(cfg)
    c_w = len(names_w)

    trace_dom = EvaluationDomain.of_size(n)
    lde_dom = EvaluationDomain.of_size(big_n, shift=GENERATOR)

    w_rows = np.stack([trace.columns[nm] for nm in names_w])
    w_coeffs = intt_mat(w_rows, trace_dom)
    padded = np.zeros((c_w, big_n), dtype=_U64)
    padded[:, :n] = w_coeffs
    w_lde = ntt_mat(padded, lde_dom)

    pub = public_column_arrays(cfg, statement)
    p_rows = np.stack([pub[nm] for nm in names_p])
    p_coeffs = intt_mat(p_rows, trace_dom)
    padded = np.zeros((len(names_p), big_n), dtype=_U64)
    padded[:, :n] = p_coeffs
    p_lde = ntt_mat(padded, lde_dom)

    trace_tree = _pair_tree(w_lde)
    t = _transcript_for(cfg, statement)
    t.absorb(b"trace-root", trace_tree.root)

    cons = constraint_set(cfg)
    alphas = [t.challenge_field() for _ in cons]

    cols_lde = {nm: w_lde[k] for k, nm in enumerate(names_w)}
    cols_lde.update({nm: p_lde[k] for k, nm in enumerate(names_p)})
    xs = np.array(lde_dom.points(), dtype=_U64)
    zh_inv = v_inv(v_sub(v_pow(xs, n), _U64(1)))
    comp_evals = v_mul(combine_constraints(cons, cols_lde, alphas), zh_inv)

    comp_tree = _pair_tree(comp_evals.reshape(1, -1))
    t.absorb(b"comp-root", comp_tree.root)

    z = _draw_ood_point(t, n, big_n)
    ood_public = _horner_rows(p_coeffs, z)
    ood_witness = _horner_rows(w_coeffs, z)
    comp_coeffs = [int(x) for x in intt_mat(comp_evals.reshape(1, -1), lde_dom)[0]]
    ood_comp = horner(comp_coeffs, z)
    t.absorb(b"ood", _u64s(ood_public + ood_witness + [ood_comp]))

    betas = [t.challenge_field() for _ in range(c_w + 1)]

    inv_xz = v_inv(v_sub(xs, _U64(z)))
    beta_col = np.array(betas[:c_w], dtype=_U64).reshape(-1, 1)
    ood_col = np.array(ood_witness, dtype=_U64).reshape(-1, 1)
    acc = mod_sum_rows(v_mul(beta_col, v_sub(w_lde, ood_col)))
    acc = v_add(acc, v_mul(_U64(betas[c_w]), v_sub(comp_evals, _U64(ood_comp))))
    layer = v_mul(acc, inv_xz)

    folds = _num_folds(cfg)
    inv2 = _U64(f_inv(2))
    fri_trees: list[MerkleTree] = []
    fri_roots: list[bytes] = []
    fri_beta = t.challenge_field()
    xs_layer = xs
    for level in range(folds):
        half = layer.shape[0] // 2
        lo, hi = layer[:half], layer[half:]
        even = v_mul(v_add(lo, hi), inv2)
        odd = v_mul(v_mul(v_sub(lo, hi), inv2), v_inv(xs_layer[:half]))
        layer = v_add(even, v_mul(_U64(fri_beta), odd))
        xs_layer = v_mul(xs_layer[:half], xs_layer[:half])
        if level < folds - 1:
            tree = _pair_tree(layer.reshape(1, -1))
            fri_trees.append(tree)
            fri_roots.append(tree.root)
            t.absorb(b"fri-root", tree.root)
            fri_beta = t.challenge_field()

    final_size = big_n >> folds
    final_dom = EvaluationDomain.of_size(final_size, shift=f_pow(GENERATOR, 1 << folds))
    final_coeffs = intt([int(x) for x in layer], final_dom)
    fri_final = final_coeffs[:cfg.fri_final_degree]
    if check and any(final_coeffs[cfg.fri_final_degree:]):
        raise AssertionError("final FRI layer exceeds the degree bound")
    t.absorb(b"fri-final", _u64s(fri_final))

    indices = t.challenge_indices(cfg.fri_query_count, big_n // 2)
    openings = []
    for idx in indices:
        fri_paths = []
        for level, tree in enumerate(fri_trees):
            pair_count = (big_n >> (level + 1)) // 2
            fri_paths.append(merkle_open(tree, idx % pair_count))
        openings.append(QueryOpening(idx, merkle_open(trace_tree, idx),
                                     merkle_open(comp_tree, idx), fri_paths))

    return StarkProof(cfg, statement, trace_tree.root, comp_tree.root, z,
                      ood_public, ood_witness, ood_comp, fri_roots, fri_final,
                      openings)


# ---------------------------------------------------------------------------
# Verifier
# ---------------------------------------------------------------------------

def _barycentric(values: np.ndarray, omega_pows: list[int],
                 inv_denoms: list[int], scale: int) -> int:
    """Evaluate the interpolant of values-over-H at the precomputed point."""
    acc = 0
    for k, v in enumerate(values):
        acc += int(v) * omega_pows[k] % P * inv_denoms[k]
    return acc % P * scale % P


def verify(proof: StarkProof) -> VerificationResult:
    """Check a proof; accept only if every layer of the argument holds."""
    cfg = proof.config
    n = cfg.rows
    big_n = n * cfg.blowup
    names_w = witness_columns(cfg)
    names_p = public_columns(cfg)
    c_w = len(names_w)
    folds = _num_folds(cfg)
    layers = _committed_layers(cfg)
    lookup_checks = 0
    query_checks = 0

    def reject(reason: str) -> VerificationResult:
        return VerificationResult(False, reason, lookup_checks, query_checks)

    # -- table lookups -----------------------------------------------------
    try:
        for row in proof.statement.rows:
            expected = payload_leaf_indices(cfg, row.zone_index, row.i, row.j)
            if len(row.openings) != len(expected):
                return reject(BAD_LOOKUP_PATH)
            for path, want in zip(row.openings, expected):
                lookup_checks += 1
                if path.leaf_index != want:
                    return reject(BAD_LOOKUP_PATH)
                if not merkle_verify(proof.statement.table_root, path):
                    return reject(BAD_LOOKUP_PATH)
        pub = public_column_arrays(cfg, proof.statement)
    except ValueError:
        return reject(BAD_LOOKUP_PATH)

    # -- structure ---------------------------------------------------------
    if len(proof.fri_final) > cfg.fri_final_degree:
        return reject(DEGREE_EXCEEDED)
    if len(proof.ood_witness) != c_w or len(proof.ood_public) != len(names_p):
        return reject(OOD_MISMATCH)
    if len(proof.fri_roots) != layers:
        return reject(FRI_FOLD_MISMATCH)
    if len(proof.openings) != cfg.fri_query_count:
        return reject(BAD_TRACE_OPENING)

    # -- transcript replay -------------------------------------------------
    t = _transcript_for(cfg, proof.statement)
    t.absorb(b"trace-root", proof.trace_root)
    cons = constraint_set(cfg)
    alphas = [t.challenge_field() for _ in cons]
    t.absorb(b"comp-root", proof.composition_root)
    z = _draw_ood_point(t, n, big_n)
    if z != proof.ood_point:
        return reject(OOD_MISMATCH)
    t.absorb(b"ood", _u64s(proof.ood_public + proof.ood_witness +
                           [proof.ood_composition]))
    betas = [t.challenge_field() for _ in range(c_w + 1)]
    fri_betas = [t.challenge_field()]
    for root in proof.fri_roots:
        t.absorb(b"fri-root", root)
        fri_betas.append(t.challenge_field())
    t.absorb(b"fri-final", _u64s(proof.fri_final))
    indices = t.challenge_indices(cfg.fri_query_count, big_n // 2)

    # -- public columns at z (verifier's own evaluation) -------------------
    omega = root_of_unity(n)
    omega_pows = [1] * n
    for k in range(1, n):
        omega_pows[k] = omega_pows[k - 1] * omega % P
    denoms = [f_sub(z, w) for w in omega_pows]
    if any(d == 0 for d in denoms):  # z guards exclude this, but be safe
        return reject(OOD_MISMATCH)
    inv_denoms = inv_many(denoms)
    zh_z = f_sub(f_pow(z, n), 1)
    scale = f_mul(zh_z, f_inv(n))
    pub_at_z = {nm: _barycentric(pub[nm], omega_pows, inv_denoms, scale)
                for nm in names_p}
    for claimed, nm in zip(proof.ood_public, names_p):
        if claimed % P != pub_at_z[nm]:
            return reject(OOD_MISMATCH)

    # -- out-of-domain constraint identity ---------------------------------
    cols_z = dict(pub_at_z)
    cols_z.update({nm: proof.ood_witness[k] % P for k, nm in enumerate(names_w)})
    lhs = 0
    for alpha, con in zip(alphas, cons):
        lhs = (lhs + alpha * con.evaluate(cols_z)) % P
    if lhs != f_mul(proof.ood_composition % P, zh_z):
        return reject(OOD_MISMATCH)

    # -- query openings ----------------------------------------------------
    q = cfg.fri_query_count
    w_lo = np.zeros((c_w, q), dtype=_U64)
    w_hi = np.zeros((c_w, q), dtype=_U64)
    c_lo = np.zeros(q, dtype=_U64)
    c_hi = np.zeros(q, dtype=_U64)
    for col, (idx, op) in enumerate(zip(indices, proof.openings)):
        if op.index != idx or op.trace_path.leaf_index != idx:
            return reject(BAD_TRACE_OPENING)
        query_checks += 1
        if not merkle_verify(proof.trace_root, op.trace_path):
            return reject(BAD_TRACE_OPENING)
        if len(op.trace_path.payload) != 2 * c_w * 8:
            return reject(BAD_TRACE_OPENING)
        query_checks += 1
        if (op.composition_path.leaf_index != idx
                or not merkle_verify(proof.composition_root, op.composition_path)
                or len(op.composition_path.payload) != 16):
            return reject(BAD_TRACE_OPENING)
        w_lo[:, col], w_hi[:, col] = _parse_pair(op.trace_path.payload, c_w)
        cpair = _parse_pair(op.composition_path.payload, 1)
        c_lo[col] = cpair[0][0]
        c_hi[col] = cpair[1][0]

    # DEEP combination at x and -x for every queried pair, vectorized
    omega_lde = root_of_unity(big_n)
    xs = np.array([GENERATOR * pow(omega_lde, i, P) % P for i in indices],
                  dtype=_U64)
    xs_neg = v_sub(np.zeros(q, dtype=_U64), xs)
    beta_col = np.array(betas[:c_w], dtype=_U64).reshape(-1, 1)
    ood_col = np.array([v % P for v in proof.ood_witness], dtype=_U64).reshape(-1, 1)

    def deep_at(vals: np.ndarray, comp_vals: np.ndarray, pts: np.ndarray) -> np.ndarray:
        acc = mod_sum_rows(v_mul(beta_col, v_sub(vals, ood_col)))
        acc = v_add(acc, v_mul(_U64(betas[c_w]),
                               v_sub(comp_vals, _U64(proof.ood_composition % P))))
        return v_mul(acc, v_inv(v_sub(pts, _U64(z))))

    f0_lo = deep_at(w_lo, c_lo, xs)
    f0_hi = deep_at(w_hi, c_hi, xs_neg)

    # -- FRI fold chain ----------------------------------------------------
    inv2 = f_inv(2)
    for col, (idx, op) in enumerate(zip(indices, proof.openings)):
        if len(op.fri_paths) != layers:
            return reject(FRI_FOLD_MISMATCH)
        a, b = int(f0_lo[col]), int(f0_hi[col])
        for level in range(folds):
            size = big_n >> level
            pos = idx % (size // 2)
            x_pt = f_pow(GENERATOR, 1 << level) * pow(omega_lde, (pos << level), P) % P
            beta = fri_betas[level]
            folded = (f_mul(f_add(a, b), inv2)
                      + f_mul(f_mul(f_mul(f_sub(a, b), inv2), f_inv(x_pt)), beta)) % P
            if level < folds - 1:
                path = op.fri_paths[level]
                next_size = big_n >> (level + 1)
                next_pos = idx % (next_size // 2)
                query_checks += 1
                if (path.leaf_index != next_pos
                        or not merkle_verify(proof.fri_roots[level], path)
                        or len(path.payload) != 16):
                    return reject(FRI_FOLD_MISMATCH)
                pair = _parse_pair(path.payload, 1)
                e_lo, e_hi = int(pair[0][0]), int(pair[1][0])
                here = idx % next_size
                expected = e_lo if here < next_size // 2 else e_hi
                if folded != expected:
                    return reject(FRI_FOLD_MISMATCH)
                a, b = e_lo, e_hi
            else:
                final_size = big_n >> folds
                here = idx % final_size
                x_fin = (f_pow(GENERATOR, 1 << folds)
                         * pow(omega_lde, (here << folds), P) % P)
                if folded != horner(proof.fri_final, x_fin):
                    return reject(FRI_FOLD_MISMATCH)
        if folds == 0:
            x = int(xs[col])
            if (horner(proof.fri_final, x) != a
                    or horner(proof.fri_final, int(xs_neg[col])) != b):
                return reject(FRI_FOLD_MISMATCH)

    return VerificationResult(True, ACCEPT, lookup_checks, query_checks)
