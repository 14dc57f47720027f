"""Game loop and match harness: play games, enforce clocks, collect records."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional

from .agent import AgentConfig, FogAgent, RandomAgent
from .board import (
    BLACK, BLACK_WIN, DRAW, WHITE, WHITE_WIN,
    Move, apply_move, is_terminal, legal_moves, move_san, replay, startpos,
)
from .observe import observe
from .policy import parse_time_control


@dataclass
class GameRecord:
    seed: int
    white: str
    black: str
    time_control: str
    moves: list = field(default_factory=list)        # SAN strings
    timings_ms: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)  # one dict per engine move
    result: Optional[int] = None
    reason: str = ""

    def result_string(self) -> str:
        return {WHITE_WIN: "1-0", BLACK_WIN: "0-1", DRAW: "1/2-1/2", None: "*"}[self.result]

    def to_pgn(self) -> str:
        tags = [f'[White "{self.white}"]', f'[Black "{self.black}"]',
                f'[TimeControl "{self.time_control}"]', f'[Seed "{self.seed}"]',
                f'[Result "{self.result_string()}"]']
        if self.reason:
            tags.append(f'[Termination "{self.reason}"]')
        body = []
        for i, san in enumerate(self.moves):
            if i % 2 == 0:
                body.append(f"{i // 2 + 1}.")
            body.append(san)
            comment = f"{{{self.timings_ms[i]:.0f}ms}}" if i < len(self.timings_ms) else ""
            if comment:
                body.append(comment)
        body.append(self.result_string())
        return "\n".join(tags) + "\n\n" + " ".join(body) + "\n"

    def replay_result(self) -> Optional[int]:
        """Re-derive the result from the move list through the rules engine."""
        p = startpos()
        counts = {p.key(): 1}
        result = None
        for p, _m in replay(self.moves):
            counts[p.key()] = counts.get(p.key(), 0) + 1
            result = is_terminal(p, counts)
            if result is not None:
                break
        return result


def play_game(white, black, time_control: str = "0.1s", seed: int = 0,
              max_plies: int = 600, check_beliefs: bool = False) -> GameRecord:
    """Play one full game between two agents, enforcing the clock."""
    base_ms, inc_ms, per_move_ms = parse_time_control(time_control)
    clocks = {WHITE: base_ms, BLACK: base_ms}
    agents = {WHITE: white, BLACK: black}
    rec = GameRecord(seed=seed, white=type(white).__name__,
                     black=type(black).__name__, time_control=time_control)
    p = startpos()
    rep_counts = {p.key(): 1}
    for color, agent in agents.items():
        if hasattr(agent, "initial_obs"):
            agent.initial_obs(observe(p, color))

    while True:
        result = is_terminal(p, rep_counts)
        if result is not None:
            rec.result, rec.reason = result, "rules"
            break
        if len(rec.moves) >= max_plies:
            rec.result, rec.reason = DRAW, "move cap"
            break
        mover = p.stm
        agent = agents[mover]
        override_s = getattr(agent, "_fixed_per_move", None)
        move_budget = override_s * 1000.0 if override_s else per_move_ms
        t0 = time.monotonic()
        try:
            move = agent.choose_move(clock_ms=clocks[mover] or None,
                                     increment_ms=inc_ms,
                                     per_move_ms=move_budget)
        except Exception as exc:  # engine crash forfeits the game
            rec.result = BLACK_WIN if mover == WHITE else WHITE_WIN
            rec.reason = f"forfeit: {exc!r}"
            break
        elapsed_ms = (time.monotonic() - t0) * 1000.0
        if per_move_ms is None and base_ms:
            clocks[mover] -= elapsed_ms
            if clocks[mover] < 0:
                rec.result = BLACK_WIN if mover == WHITE else WHITE_WIN
                rec.reason = "time"
                break
            clocks[mover] += inc_ms
        if move not in legal_moves(p):
            rec.result = BLACK_WIN if mover == WHITE else WHITE_WIN
            rec.reason = "illegal move"
            break
        rec.moves.append(move_san(p, move))
        rec.timings_ms.append(elapsed_ms)
        p = apply_move(p, move)
        rep_counts[p.key()] = rep_counts.get(p.key(), 0) + 1
        agent.note_own_move(move, observe(p, mover))
        agents[1 - mover].note_opponent_move(observe(p, 1 - mover))
        diag = getattr(agent, "last_diagnostics", None)
        if diag:
            rec.diagnostics.append({"ply": len(rec.moves), "mover": mover, **diag})
        if check_beliefs:
            for color in (WHITE, BLACK):
                b = getattr(agents[color], "belief", None)
                if b is not None and not b.contains_state(p):
                    raise AssertionError(
                        f"true position filtered out of {color}'s belief at ply "
                        f"{len(rec.moves)}")
        over = is_terminal(p, rep_counts)
        if over is not None:
            rec.result, rec.reason = over, "rules"
            break
    return rec


@dataclass
class MatchStats:
    wins: int = 0
    draws: int = 0
    losses: int = 0
    records: list = field(default_factory=list)

    @property
    def games(self) -> int:
        return self.wins + self.draws + self.losses

    def score_percent(self) -> Decimal:
        if self.games == 0:
            return Decimal(0)
        pct = (Decimal(2 * self.wins + self.draws) / Decimal(2 * self.games)) * 100
        return pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)

    def score_string(self) -> str:
        return (f"{self.score_percent()}% "
                f"(+{self.wins} ={self.draws} -{self.losses})")

    def z_score(self) -> float:
        # against the even-score null with the worst-case variance n/4
        n = self.games
        if n == 0:
            return 0.0
        s = self.wins + 0.5 * self.draws
        return (s - n / 2.0) / (n ** 0.5 / 2.0)


def run_match(games: int, hero: Callable[[int, int], object],
              villain: Callable[[int, int], object],
              time_control: str = "0.1s", master_seed: int = 0,
              check_beliefs: bool = False,
              on_game=None) -> MatchStats:
    """Alternating-colors match; `hero`/`villain` build agents per (color, seed)."""
    stats = MatchStats()
    seeds = random.Random(master_seed)
    for g in range(games):
        seed = seeds.randrange(2 ** 31)
        hero_color = WHITE if g % 2 == 0 else BLACK
        agents = {hero_color: hero(hero_color, seed),
                  1 - hero_color: villain(1 - hero_color, seed + 1)}
        rec = play_game(agents[WHITE], agents[BLACK], time_control, seed,
                        check_beliefs=check_beliefs)
        stats.records.append(rec)
        if rec.result == DRAW:
            stats.draws += 1
        elif (rec.result == WHITE_WIN) == (hero_color == WHITE):
            stats.wins += 1
        else:
            stats.losses += 1
        if on_game is not None:
            on_game(g, rec, stats)
    return stats


def timescale_study(budgets_s: list, games_per_pair: int = 100,
                    master_seed: int = 0, config: Optional[AgentConfig] = None,
                    on_game=None):
    """Round-robin of adjacent time budgets; rows of (t1, t2, W, D, L)."""
    if len(budgets_s) < 2:
        raise ValueError("need >= 2 budgets")
    rows = []
    for lo, hi in zip(budgets_s, budgets_s[1:]):
        def mk(per_move):
            def build(color, seed):
                cfg = AgentConfig(**{**(config or AgentConfig()).__dict__,
                                     "seed": seed})
                agent = FogAgent(color, cfg)
                agent._fixed_per_move = per_move
                return agent
            return build

        stats = run_match(games_per_pair, mk(hi), mk(lo),
                          time_control=f"{hi}s", master_seed=master_seed,
                          on_game=on_game)
        rows.append((lo, hi, stats.wins, stats.draws, stats.losses))
    return rows
