"""Independent slow reference implementations used to cross-check the engine.

Deliberately written with a different structure from the production code:
piece movement is re-derived square by square with explicit direction walks,
and standard-chess legality (check rules) is available for perft comparison.
"""

from fog_engine.board import (
    BLACK, EMPTY, WHITE, Move, Position, apply_move,
)

_DELTAS = {
    "N": [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)],
    "B": [(1, 1), (1, -1), (-1, 1), (-1, -1)],
    "R": [(1, 0), (-1, 0), (0, 1), (0, -1)],
}
_DELTAS["Q"] = _DELTAS["B"] + _DELTAS["R"]
_DELTAS["K"] = _DELTAS["Q"]

_KIND = {1: "P", 2: "N", 3: "B", 4: "R", 5: "Q", 6: "K"}


def _color_of(code):
    if code == EMPTY:
        return None
    return WHITE if code <= 6 else BLACK


def slow_moves(p: Position, fow: bool = True):
    """All legal moves for p.stm; fow=False applies regular-chess check rules."""
    moves = []
    color = p.stm
    for s in range(64):
        code = p.board[s]
        if _color_of(code) != color:
            continue
        kind = _KIND[code if code <= 6 else code - 6]
        f, r = s % 8, s // 8
        if kind == "P":
            fwd = 1 if color == WHITE else -1
            start = 1 if color == WHITE else 6
            last = 7 if color == WHITE else 0
            if 0 <= r + fwd <= 7 and p.board[(r + fwd) * 8 + f] == EMPTY:
                moves.extend(_pawn_moves(s, (r + fwd) * 8 + f, r + fwd == last))
                if r == start and p.board[(r + 2 * fwd) * 8 + f] == EMPTY:
                    moves.append(Move(s, (r + 2 * fwd) * 8 + f))
            for df in (-1, 1):
                nf = f + df
                if not 0 <= nf <= 7 or not 0 <= r + fwd <= 7:
                    continue
                t = (r + fwd) * 8 + nf
                if _color_of(p.board[t]) == 1 - color:
                    moves.extend(_pawn_moves(s, t, r + fwd == last))
                elif t == p.ep:
                    moves.append(Move(s, t))
        elif kind in ("N", "K"):
            for df, dr in _DELTAS[kind]:
                nf, nr = f + df, r + dr
                if 0 <= nf <= 7 and 0 <= nr <= 7:
                    t = nr * 8 + nf
                    if _color_of(p.board[t]) != color:
                        moves.append(Move(s, t))
        else:
            for df, dr in _DELTAS[kind]:
                nf, nr = f + df, r + dr
                while 0 <= nf <= 7 and 0 <= nr <= 7:
                    t = nr * 8 + nf
                    owner = _color_of(p.board[t])
                    if owner == color:
                        break
                    moves.append(Move(s, t))
                    if owner is not None:
                        break
                    nf, nr = nf + df, nr + dr

    moves.extend(_castles(p, color, fow))
    if not fow:
        moves = [m for m in moves if not _leaves_king_attacked(p, m)]
    return moves


def _pawn_moves(frm, to, promoting):
    if promoting:
        return [Move(frm, to, k) for k in (5, 4, 3, 2)]
    return [Move(frm, to)]


def _castles(p: Position, color, fow):
    out = []
    rank = 0 if color == WHITE else 7
    king = rank * 8 + 4
    kcode = 6 if color == WHITE else 12
    rcode = 4 if color == WHITE else 10
    kbit = 1 if color == WHITE else 4
    qbit = 2 if color == WHITE else 8
    if p.board[king] != kcode:
        return out
    if p.castling & kbit and p.board[king + 3] == rcode \
            and p.board[king + 1] == EMPTY and p.board[king + 2] == EMPTY:
        if fow or not any(_attacked(p, q, 1 - color) for q in (king, king + 1, king + 2)):
            out.append(Move(king, king + 2))
    if p.castling & qbit and p.board[king - 4] == rcode \
            and p.board[king - 1] == EMPTY and p.board[king - 2] == EMPTY \
            and p.board[king - 3] == EMPTY:
        if fow or not any(_attacked(p, q, 1 - color) for q in (king, king - 1, king - 2)):
            out.append(Move(king, king - 2))
    return out


def _attacked(p: Position, square, by_color):
    """Does any piece of by_color attack `square`?  Brute force over that side's moves."""
    probe = Position(p.board, by_color, 0, -1)
    for m in slow_moves(probe, fow=True):
        if m.to == square:
            code = p.board[m.frm]
            kind = _KIND[code if code <= 6 else code - 6]
            if kind == "P" and (m.frm % 8) == (square % 8):
                continue  # pawn pushes do not attack
            return True
    # pawn capture squares count as attacked even when empty
    fwd = 1 if by_color == WHITE else -1
    pr = square // 8 - fwd
    pcode = 1 if by_color == WHITE else 7
    if 0 <= pr <= 7:
        for df in (-1, 1):
            pf = square % 8 + df
            if 0 <= pf <= 7 and p.board[pr * 8 + pf] == pcode:
                return True
    return False


def _leaves_king_attacked(p: Position, m: Move):
    q = apply_move(p, m)
    kcode = 6 if p.stm == WHITE else 12
    ks = q.board.find(kcode)
    if ks < 0:
        return True
    return _attacked(q, ks, q.stm)


def slow_perft(p: Position, depth: int, fow: bool):
    if depth == 0:
        return 1
    total = 0
    for m in slow_moves(p, fow=fow):
        total += slow_perft(apply_move(p, m), depth - 1, fow)
    return total


# ---------------------------------------------------------------------------
# sequence-form LP solver for small zero-sum games (von Stengel formulation)


def sequence_form_lp_value(game):
    """Exact game value for the maximizer via linear programming."""
    import numpy as np
    from scipy.optimize import linprog
    from scipy.sparse import lil_matrix

    from fog_engine.efg import CHANCE, PMAX, PMIN, TERMINAL, build_full_tree

    tree = build_full_tree(game.root_state())

    seq_ids = {PMAX: {None: 0}, PMIN: {None: 0}}
    infosets = {PMAX: {}, PMIN: {}}  # key -> (parent seq id, [child seq ids])
    payoff = {}

    def seq_id(player, seq):
        table = seq_ids[player]
        if seq not in table:
            table[seq] = len(table)
        return table[seq]

    def walk(node, chance_reach, s1, s2):
        if node.player == TERMINAL:
            payoff[(s1, s2)] = payoff.get((s1, s2), 0.0) + chance_reach * node.value
            return
        if node.player == CHANCE:
            for idx, c in enumerate(node.children):
                walk(tree.nodes[c], chance_reach * node.chance_probs[idx], s1, s2)
            return
        player = node.player
        key = node.state.seq_key(player)
        parent = s1 if player == PMAX else s2
        if key not in infosets[player]:
            kids = [seq_id(player, (key, a)) for a in range(len(node.actions))]
            infosets[player][key] = (parent, kids)
        kids = infosets[player][key][1]
        for idx, c in enumerate(node.children):
            if player == PMAX:
                walk(tree.nodes[c], chance_reach, kids[idx], s2)
            else:
                walk(tree.nodes[c], chance_reach, s1, kids[idx])

    walk(tree.root, 1.0, 0, 0)

    n1 = len(seq_ids[PMAX])
    n2 = len(seq_ids[PMIN])
    A = lil_matrix((n1, n2))
    for (s1, s2), u in payoff.items():
        A[s1, s2] += u

    def flow_matrix(player, n):
        rows = len(infosets[player]) + 1
        E = lil_matrix((rows, n))
        E[0, 0] = 1.0
        for r, (key, (parent, kids)) in enumerate(infosets[player].items(), 1):
            E[r, parent] = 1.0
            for k in kids:
                E[r, k] = -1.0
        return E

    E = flow_matrix(PMAX, n1)
    F = flow_matrix(PMIN, n2)
    e = np.zeros(E.shape[0]); e[0] = 1.0
    f = np.zeros(F.shape[0]); f[0] = 1.0

    # variables: [x (n1), q (rows of F)]; maximize f.q
    # s.t. F^T q - A^T x <= 0 ; E x = e ; x >= 0, q free
    import scipy.sparse as sp
    n_q = F.shape[0]
    c = np.concatenate([np.zeros(n1), -f])
    A_ub = sp.hstack([-A.T.tocsr(), F.T.tocsr()])
    b_ub = np.zeros(n2)
    A_eq = sp.hstack([E.tocsr(), sp.csr_matrix((E.shape[0], n_q))])
    b_eq = e
    bounds = [(0, None)] * n1 + [(None, None)] * n_q
    res = linprog(c, A_ub=A_ub.tocsr(), b_ub=b_ub, A_eq=A_eq.tocsr(),
                  b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return -res.fun
