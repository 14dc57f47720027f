"""Fog of War chess rules: positions, move generation, transitions, terminality.

FoW chess differs from regular chess only in what is *legal*, never in how
pieces move geometrically: there is no check, so moving into (or staying in)
check is legal, castling may pass through or land on attacked squares, and the
game ends when a king is captured.  Stalemate is a win for the stalemating
side, and 50-move / threefold draws trigger automatically.

Squares are ints 0..63 with a1 = 0, b1 = 1, ..., h8 = 63.  The board is a
64-byte string; positions are immutable and safe to share across threads.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional

WHITE, BLACK = 0, 1

EMPTY = 0
WP, WN, WB, WR, WQ, WK = 1, 2, 3, 4, 5, 6
BP, BN, BB, BR, BQ, BK = 7, 8, 9, 10, 11, 12

PIECE_CHARS = ".PNBRQKpnbrqk"
PROMO_KINDS = (WQ, WR, WB, WN)  # promotion stored as a white piece *kind* 2..5

# castling-rights bits
CR_WK, CR_WQ, CR_BK, CR_BQ = 1, 2, 4, 8

WHITE_WIN, BLACK_WIN, DRAW = 1, -1, 0


def sq(file: int, rank: int) -> int:
    return rank * 8 + file


def sq_name(s: int) -> str:
    return "abcdefgh"[s & 7] + "12345678"[s >> 3]


def parse_sq(name: str) -> int:
    return (int(name[1]) - 1) * 8 + (ord(name[0]) - 97)


class Move(NamedTuple):
    frm: int
    to: int
    promo: Optional[int] = None  # piece kind WN..WQ when a pawn promotes

    def uci(self) -> str:
        return move_uci(self)


def move_uci(m: Move) -> str:
    s = sq_name(m.frm) + sq_name(m.to)
    if m.promo:
        s += {WN: "n", WB: "b", WR: "r", WQ: "q"}[m.promo]
    return s


def parse_uci(text: str) -> Move:
    promo = None
    if len(text) == 5:
        promo = {"n": WN, "b": WB, "r": WR, "q": WQ}[text[4]]
    return Move(parse_sq(text[:2]), parse_sq(text[2:4]), promo)


class IllegalMoveError(ValueError):
    pass


class GameOverError(ValueError):
    pass


# ---------------------------------------------------------------------------
# precomputed geometry


def _build_tables():
    knight, king = [], []
    rays = []  # rays[s] = list of rays, each a tuple of squares walking outward
    for s in range(64):
        f, r = s & 7, s >> 3
        kn = []
        for df, dr in ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)):
            nf, nr = f + df, r + dr
            if 0 <= nf < 8 and 0 <= nr < 8:
                kn.append(sq(nf, nr))
        knight.append(tuple(kn))
        kg = []
        for df in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if df == dr == 0:
                    continue
                nf, nr = f + df, r + dr
                if 0 <= nf < 8 and 0 <= nr < 8:
                    kg.append(sq(nf, nr))
        king.append(tuple(kg))
        rs = []
        for df, dr in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
            ray = []
            nf, nr = f + df, r + dr
            while 0 <= nf < 8 and 0 <= nr < 8:
                ray.append(sq(nf, nr))
                nf += df
                nr += dr
            rs.append(tuple(ray))
        rays.append(tuple(rs))
    return tuple(knight), tuple(king), tuple(rays)


KNIGHT_TARGETS, KING_TARGETS, RAYS = _build_tables()
ROOK_DIRS = (0, 1, 2, 3)
BISHOP_DIRS = (4, 5, 6, 7)
ALL_DIRS = (0, 1, 2, 3, 4, 5, 6, 7)

_START_BOARD = bytes(
    [WR, WN, WB, WQ, WK, WB, WN, WR]
    + [WP] * 8
    + [EMPTY] * 32
    + [BP] * 8
    + [BR, BN, BB, BQ, BK, BB, BN, BR]
)


class Position:
    """Immutable FoW chess position, including castling/ep rights and clocks."""

    __slots__ = ("board", "stm", "castling", "ep", "halfmove", "fullmove", "_key", "_hash")

    def __init__(self, board: bytes, stm: int, castling: int, ep: int,
                 halfmove: int = 0, fullmove: int = 1):
        self.board = board
        self.stm = stm
        self.castling = castling
        self.ep = ep  # target square of a double push just played, else -1
        self.halfmove = halfmove
        self.fullmove = fullmove
        self._key = None
        self._hash = None

    def key(self):
        """Repetition digest: placement, side to move, castling and ep rights."""
        k = self._key
        if k is None:
            k = self._key = (self.board, self.stm, self.castling, self.ep)
        return k

    def __eq__(self, other):
        return isinstance(other, Position) and self.key() == other.key() \
            and self.halfmove == other.halfmove

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash(self.key())
        return h

    def piece_at(self, s: int) -> int:
        return self.board[s]

    def king_square(self, color: int) -> Optional[int]:
        k = WK if color == WHITE else BK
        i = self.board.find(k)
        return i if i >= 0 else None

    def __repr__(self):
        return f"Position({to_fen(self)!r})"


def startpos() -> Position:
    return Position(_START_BOARD, WHITE, CR_WK | CR_WQ | CR_BK | CR_BQ, -1, 0, 1)


# ---------------------------------------------------------------------------
# FEN


def to_fen(p: Position) -> str:
    rows = []
    for r in range(7, -1, -1):
        row, run = "", 0
        for f in range(8):
            c = p.board[sq(f, r)]
            if c == EMPTY:
                run += 1
            else:
                if run:
                    row += str(run)
                    run = 0
                row += PIECE_CHARS[c]
        if run:
            row += str(run)
        rows.append(row)
    cr = "".join(ch for bit, ch in ((CR_WK, "K"), (CR_WQ, "Q"), (CR_BK, "k"), (CR_BQ, "q"))
                 if p.castling & bit) or "-"
    ep = sq_name(p.ep) if p.ep >= 0 else "-"
    return "%s %s %s %s %d %d" % ("/".join(rows), "wb"[p.stm], cr, ep, p.halfmove, p.fullmove)


def from_fen(fen: str) -> Position:
    parts = fen.split()
    board = bytearray(64)
    r, f = 7, 0
    for ch in parts[0]:
        if ch == "/":
            r -= 1
            f = 0
        elif ch.isdigit():
            f += int(ch)
        else:
            board[sq(f, r)] = PIECE_CHARS.index(ch)
            f += 1
    stm = WHITE if parts[1] == "w" else BLACK
    castling = 0
    if len(parts) > 2 and parts[2] != "-":
        for ch in parts[2]:
            castling |= {"K": CR_WK, "Q": CR_WQ, "k": CR_BK, "q": CR_BQ}.get(ch, 0)
    ep = parse_sq(parts[3]) if len(parts) > 3 and parts[3] != "-" else -1
    halfmove = int(parts[4]) if len(parts) > 4 else 0
    fullmove = int(parts[5]) if len(parts) > 5 else 1
    return Position(bytes(board), stm, castling, ep, halfmove, fullmove)


# ---------------------------------------------------------------------------
# move generation (FoW legality: purely geometric, no check rules)


def moves_for(board: bytes, color: int, castling: int, ep: int) -> list[Move]:
    """All moves `color` could play on `board` — FoW legal, ignoring whose turn it is.

    `ep` must be -1 unless an en-passant capture by `color` is actually
    available (i.e. the opponent just double-pushed).
    """
    moves = []
    add = moves.append
    if color == WHITE:
        own_lo, own_hi = WP, WK
        push, start_rank, promo_rank = 8, 1, 6
        enemy_lo, enemy_hi = BP, BK
        pawn = WP
    else:
        own_lo, own_hi = BP, BK
        push, start_rank, promo_rank = -8, 6, 1
        enemy_lo, enemy_hi = WP, WK
        pawn = BP

    for s in range(64):
        pc = board[s]
        if pc < own_lo or pc > own_hi:
            continue
        kind = pc - own_lo + 1  # 1..6 regardless of color
        if kind == 1:  # pawn
            r = s >> 3
            t = s + push
            if board[t] == EMPTY:
                if r == promo_rank:
                    for pk in PROMO_KINDS:
                        add(Move(s, t, pk))
                else:
                    add(Move(s, t))
                    if r == start_rank and board[t + push] == EMPTY:
                        add(Move(s, t + push))
            f = s & 7
            for df in (-1, 1):
                nf = f + df
                if not 0 <= nf < 8:
                    continue
                t = s + push + df
                tp = board[t]
                if enemy_lo <= tp <= enemy_hi:
                    if r == promo_rank:
                        for pk in PROMO_KINDS:
                            add(Move(s, t, pk))
                    else:
                        add(Move(s, t))
                elif t == ep:
                    add(Move(s, t))
        elif kind == 2:
            for t in KNIGHT_TARGETS[s]:
                tp = board[t]
                if tp == EMPTY or enemy_lo <= tp <= enemy_hi:
                    add(Move(s, t))
        elif kind == 6:
            for t in KING_TARGETS[s]:
                tp = board[t]
                if tp == EMPTY or enemy_lo <= tp <= enemy_hi:
                    add(Move(s, t))
        else:
            if kind == 4:
                dirs = ROOK_DIRS
            elif kind == 3:
                dirs = BISHOP_DIRS
            else:
                dirs = ALL_DIRS
            rays = RAYS[s]
            for d in dirs:
                for t in rays[d]:
                    tp = board[t]
                    if tp == EMPTY:
                        add(Move(s, t))
                    else:
                        if enemy_lo <= tp <= enemy_hi:
                            add(Move(s, t))
                        break

    # castling: rights intact and intervening squares empty; check is irrelevant
    if color == WHITE:
        if castling & CR_WK and board[5] == EMPTY and board[6] == EMPTY \
                and board[4] == WK and board[7] == WR:
            add(Move(4, 6))
        if castling & CR_WQ and board[1] == EMPTY and board[2] == EMPTY \
                and board[3] == EMPTY and board[4] == WK and board[0] == WR:
            add(Move(4, 2))
    else:
        if castling & CR_BK and board[61] == EMPTY and board[62] == EMPTY \
                and board[60] == BK and board[63] == BR:
            add(Move(60, 62))
        if castling & CR_BQ and board[57] == EMPTY and board[58] == EMPTY \
                and board[59] == EMPTY and board[60] == BK and board[56] == BR:
            add(Move(60, 58))
    return moves


def legal_moves(p: Position) -> list[Move]:
    """FoW-legal moves for the side to move.  Raises once a king is gone."""
    if p.board.find(WK) < 0 or p.board.find(BK) < 0:
        raise GameOverError("game over")
    return moves_for(p.board, p.stm, p.castling, p.ep)


def apply_move(p: Position, m: Move) -> Position:
    """Apply `m` for the side to move.  Raises IllegalMoveError when `m` is not legal."""
    if m not in moves_for(p.board, p.stm, p.castling, p.ep):
        raise IllegalMoveError("illegal move")
    return apply_unchecked(p, m)


def apply_unchecked(p: Position, m: Move) -> Position:
    """Transition without legality validation; `m` must come from legal_moves(p)."""
    board = p.board
    pc = board[m.frm]
    white = p.stm == WHITE
    nb = bytearray(board)
    kind = pc if pc <= WK else pc - 6
    captured = board[m.to]
    is_pawn = kind == WP
    ep_capture = is_pawn and m.to == p.ep and captured == EMPTY

    nb[m.frm] = EMPTY
    if m.promo:
        nb[m.to] = m.promo if white else m.promo + 6
    else:
        nb[m.to] = pc
    if ep_capture:
        nb[m.to - 8 if white else m.to + 8] = EMPTY
    if kind == WK and abs(m.to - m.frm) == 2:  # castle: relocate the rook
        if m.to > m.frm:
            nb[m.to - 1] = nb[m.to + 1]
            nb[m.to + 1] = EMPTY
        else:
            nb[m.to + 1] = nb[m.to - 2]
            nb[m.to - 2] = EMPTY

    castling = p.castling
    for s in (m.frm, m.to):
        if s == 4:
            castling &= ~(CR_WK | CR_WQ)
        elif s == 0:
            castling &= ~CR_WQ
        elif s == 7:
            castling &= ~CR_WK
        elif s == 60:
            castling &= ~(CR_BK | CR_BQ)
        elif s == 56:
            castling &= ~CR_BQ
        elif s == 63:
            castling &= ~CR_BK

    ep = -1
    if is_pawn and abs(m.to - m.frm) == 16:
        ep = (m.frm + m.to) // 2
    halfmove = 0 if (is_pawn or captured != EMPTY or ep_capture) else p.halfmove + 1
    return Position(bytes(nb), 1 - p.stm, castling, ep,
                    halfmove, p.fullmove + (0 if white else 1))


def square_attacked(board: bytes, target: int, by_color: int) -> bool:
    """Can a piece of `by_color` move onto `target` (captures included)?"""
    if by_color == WHITE:
        pawn, knight, bishop, rook, queen, king = WP, WN, WB, WR, WQ, WK
    else:
        pawn, knight, bishop, rook, queen, king = BP, BN, BB, BR, BQ, BK
    for s in KNIGHT_TARGETS[target]:
        if board[s] == knight:
            return True
    for s in KING_TARGETS[target]:
        if board[s] == king:
            return True
    rays = RAYS[target]
    for d in ROOK_DIRS:
        for s in rays[d]:
            pc = board[s]
            if pc != EMPTY:
                if pc == rook or pc == queen:
                    return True
                break
    for d in BISHOP_DIRS:
        for s in rays[d]:
            pc = board[s]
            if pc != EMPTY:
                if pc == bishop or pc == queen:
                    return True
                break
    # pawns capture toward target: look one rank back from the attacker's view
    back = target - 8 if by_color == WHITE else target + 8
    if 0 <= back < 64:
        f = target & 7
        if f > 0 and board[back - 1] == pawn:
            return True
        if f < 7 and board[back + 1] == pawn:
            return True
    return False


def is_terminal(p: Position, rep_counts=None) -> Optional[int]:
    """Game result if `p` is terminal, else None.

    `rep_counts` maps repetition keys to occurrence counts including `p`
    itself; omit it to skip threefold detection (e.g. inside search).
    """
    wk = p.board.find(WK) >= 0
    bk = p.board.find(BK) >= 0
    if not bk:
        return WHITE_WIN
    if not wk:
        return BLACK_WIN
    if p.halfmove >= 100:
        return DRAW
    if rep_counts is not None and rep_counts.get(p.key(), 0) >= 3:
        return DRAW
    if not moves_for(p.board, p.stm, p.castling, p.ep):
        # stalemate is a win for the stalemating player
        return WHITE_WIN if p.stm == BLACK else BLACK_WIN
    return None


def result_string(result: int) -> str:
    return {WHITE_WIN: "1-0", BLACK_WIN: "0-1", DRAW: "1/2-1/2"}[result]


# ---------------------------------------------------------------------------
# SAN (used by the harness and analysis CLI; FoW has no check glyphs, but the
# parser tolerates them so regular-chess game scores can be replayed)


def move_san(p: Position, m: Move) -> str:
    pc = p.board[m.frm]
    kind = pc if pc <= WK else pc - 6
    if kind == WK and abs(m.to - m.frm) == 2:
        return "O-O" if m.to > m.frm else "O-O-O"
    capture = p.board[m.to] != EMPTY or (kind == WP and m.to == p.ep)
    if kind == WP:
        s = ""
        if capture:
            s = "abcdefgh"[m.frm & 7] + "x"
        s += sq_name(m.to)
        if m.promo:
            s += "=" + "  NBRQ"[m.promo].strip()
        return s
    letter = " PNBRQK"[kind]
    others = [mm for mm in legal_moves(p)
              if mm.to == m.to and mm.frm != m.frm and p.board[mm.frm] == pc]
    disamb = ""
    if others:
        same_file = any((mm.frm & 7) == (m.frm & 7) for mm in others)
        same_rank = any((mm.frm >> 3) == (m.frm >> 3) for mm in others)
        if not same_file:
            disamb = "abcdefgh"[m.frm & 7]
        elif not same_rank:
            disamb = "12345678"[m.frm >> 3]
        else:
            disamb = sq_name(m.frm)
    return letter + disamb + ("x" if capture else "") + sq_name(m.to)


def parse_san(p: Position, text: str) -> Move:
    t = text.rstrip("+#!?").replace("0", "O")
    candidates = legal_moves(p)
    if t in ("O-O", "O-O-O"):
        to = (6 if t == "O-O" else 2) + (0 if p.stm == WHITE else 56)
        for m in candidates:
            pc = p.board[m.frm]
            if pc in (WK, BK) and abs(m.to - m.frm) == 2 and m.to == to:
                return m
        raise IllegalMoveError(f"no such move: {text}")
    promo = None
    if "=" in t:
        t, pch = t.split("=")
        promo = {"N": WN, "B": WB, "R": WR, "Q": WQ}[pch]
    elif t[-1] in "NBRQ" and t[0].islower():
        promo, t = {"N": WN, "B": WB, "R": WR, "Q": WQ}[t[-1]], t[:-1]
    if t[0] in "NBRQK":
        kind = " PNBRQK".index(t[0])
        body = t[1:].replace("x", "")
        dest = parse_sq(body[-2:])
        hint = body[:-2]
        matches = []
        for m in candidates:
            pc = p.board[m.frm]
            if (pc if pc <= WK else pc - 6) != kind or m.to != dest:
                continue
            if hint:
                name = sq_name(m.frm)
                if len(hint) == 2 and name != hint:
                    continue
                if len(hint) == 1 and hint not in name:
                    continue
            matches.append(m)
    else:
        body = t.replace("x", "")
        dest = parse_sq(body[-2:])
        file_hint = body[0] if len(body) > 2 or "x" in t else None
        matches = []
        for m in candidates:
            pc = p.board[m.frm]
            if (pc if pc <= WK else pc - 6) != WP or m.to != dest:
                continue
            if m.promo != promo:
                continue
            if file_hint and "abcdefgh"[m.frm & 7] != file_hint:
                continue
            matches.append(m)
    if len(matches) != 1:
        raise IllegalMoveError(f"ambiguous or illegal SAN: {text} ({len(matches)} matches)")
    return matches[0]


def replay(moves: Iterable[str], start: Optional[Position] = None):
    """Replay SAN or UCI moves from the start position; yields (position, move) pairs."""
    p = start or startpos()
    for text in moves:
        if len(text) in (4, 5) and text[0] in "abcdefgh" and text[1].isdigit():
            m = parse_uci(text)
            if m not in legal_moves(p):
                raise IllegalMoveError(f"illegal move {text}")
        else:
            m = parse_san(p, text)
        p = apply_move(p, m)
        yield p, m


def perft(p: Position, depth: int) -> int:
    if depth == 0:
        return 1
    if is_terminal(p) is not None:
        return 0
    total = 0
    for m in legal_moves(p):
        total += perft(apply_move(p, m), depth - 1)
    return total
