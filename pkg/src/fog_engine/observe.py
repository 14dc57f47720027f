"""Per-player observations: what a FoW chess player actually sees.

A player observes every square one of her pieces could legally move onto
(with its contents), plus her own occupied squares.  A pawn blocked straight
ahead by an enemy piece reveals only that the square is occupied, not by
what — unless another of her pieces could legally move there.  A pawn that
she could capture en passant is visible outright.  The legal-move set itself
is part of the observation: players always know their exact legal moves.
"""

from __future__ import annotations

from typing import Optional

from .board import BK, BLACK, BP, EMPTY, WHITE, WK, WP, Position, moves_for


class ObservationRecord:
    """Everything one player learns from a position after a move."""

    __slots__ = ("visible", "blocked", "legal", "terminal", "_digest")

    def __init__(self, visible: dict, blocked: frozenset, legal: tuple,
                 terminal: Optional[int]):
        self.visible = visible          # square -> piece code (EMPTY allowed)
        self.blocked = blocked          # squares known occupied by an unknown piece
        self.legal = legal              # sorted tuple of Move
        self.terminal = terminal        # game result if the position ended play
        self._digest = None

    def digest(self):
        d = self._digest
        if d is None:
            d = self._digest = (
                tuple(sorted(self.visible.items())),
                tuple(sorted(self.blocked)),
                self.legal,
                self.terminal,
            )
        return d

    def __eq__(self, other):
        return isinstance(other, ObservationRecord) and self.digest() == other.digest()

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self):
        vis = ",".join(f"{s}:{c}" for s, c in sorted(self.visible.items()))
        return f"<Obs vis=[{vis}] blocked={sorted(self.blocked)} legal={len(self.legal)}>"


def observe(p: Position, viewer: int) -> ObservationRecord:
    board = p.board
    if viewer == WHITE:
        own_lo, own_hi, pawn, fwd = WP, WK, WP, 8
        enemy_lo, enemy_hi = BP, BK
    else:
        own_lo, own_hi, pawn, fwd = BP, BK, BP, -8
        enemy_lo, enemy_hi = WP, WK

    # ep right applies only when it is the viewer's turn
    ep = p.ep if viewer == p.stm else -1
    legal = moves_for(board, viewer, p.castling, ep)

    visible = {}
    for s in range(64):
        pc = board[s]
        if own_lo <= pc <= own_hi:
            visible[s] = pc
    ep_seen = False
    for m in legal:
        visible[m.to] = board[m.to]
        if m.to == ep and board[m.frm] == pawn and board[m.to] == EMPTY:
            ep_seen = True
    if ep_seen:
        # the pawn that can be captured en passant is itself visible
        pawn_sq = ep - fwd
        visible[pawn_sq] = board[pawn_sq]

    blocked = set()
    for s in range(64):
        if board[s] != pawn:
            continue
        t = s + fwd
        if 0 <= t < 64 and enemy_lo <= board[t] <= enemy_hi and t not in visible:
            blocked.add(t)

    # terminality is public; reuse `legal` for the stalemate check when possible
    if board.find(WK) < 0:
        terminal = -1
    elif board.find(BK) < 0:
        terminal = 1
    elif p.halfmove >= 100:
        terminal = 0
    else:
        mover_moves = legal if viewer == p.stm else moves_for(board, p.stm, p.castling, p.ep)
        if mover_moves:
            terminal = None
        else:
            terminal = 1 if p.stm == BLACK else -1

    return ObservationRecord(visible, frozenset(blocked),
                             tuple(sorted(legal)), terminal)
