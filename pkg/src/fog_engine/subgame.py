"""KLUSS subgame construction: knowledge-limited pruning and the gadget root.

Each turn the previous search tree is cut down to the order-2 knowledge
neighbourhood of our current infoset, and a new root layer is attached: the
minimizing opponent selects which of its root infosets J to enter (or takes
the alternate value and exits, under the Resolve objective), then chance picks
a concrete node inside J proportionally to the blueprint reach.  Both gadget
objectives share the tree below the root layer; the root distribution blends
them according to how much the Resolve entry minimizers want to enter.
"""

from __future__ import annotations

from typing import Optional

from .efg import CHANCE, GameState, Infoset, PMAX, PMIN, RegretMatcher, TERMINAL, Tree


class _RootKey:
    def __repr__(self):
        return "<gadget-root>"


GADGET_ROOT_KEY = _RootKey()


# ---------------------------------------------------------------------------
# knowledge-limited pruning


def knowledge_prune(tree: Tree, player: int, key, k: int = 2):
    """Retained node ids after order-k knowledge pruning around infoset `key`.

    The connectivity graph lives on the layer of the infoset's member nodes:
    two layer nodes are adjacent when any infoset (of either player) contains
    descendants of both.  Nodes outside the downward closure of the ball of
    radius k-1 around the infoset are dropped.

    Returns (ball, retained): the surviving layer node ids and the full
    retained set (the ball's subtrees).
    """
    members = [n.idx for n in tree.nodes
               if n.player == player and n.player != TERMINAL
               and n.state.seq_key(player) == key]
    if not members:
        raise ValueError("empty infoset")

    def node_depth(idx):
        d = 0
        cur = tree.nodes[idx]
        while cur.parent >= 0:
            d += 1
            cur = tree.nodes[cur.parent]
        return d

    layer_depth = node_depth(members[0])
    layer = [n.idx for n in tree.nodes if node_depth(n.idx) == layer_depth]

    # map every infoset to the layer nodes whose subtrees intersect it
    cover: dict = {}
    for top in layer:
        stack = [top]
        while stack:
            idx = stack.pop()
            node = tree.nodes[idx]
            if node.player in (PMAX, PMIN):
                for p in (PMAX, PMIN):
                    cover.setdefault((p, node.state.seq_key(p)), set()).add(top)
            if node.children:
                stack.extend(node.children)

    adjacency = {idx: {idx} for idx in layer}
    for tops in cover.values():
        if len(tops) > 1:
            for u in tops:
                adjacency[u].update(tops)

    ball = set(members)
    frontier = set(members)
    for _ in range(k - 1):
        nxt = set()
        for u in frontier:
            nxt.update(adjacency[u])
        nxt -= ball
        ball.update(nxt)
        frontier = nxt

    retained = set()
    for top in ball:
        stack = [top]
        while stack:
            idx = stack.pop()
            retained.add(idx)
            node = tree.nodes[idx]
            if node.children:
                stack.extend(node.children)
    return ball, retained


# ---------------------------------------------------------------------------
# gadget machinery


def resolve_priors(blueprint_reach: list) -> list:
    """Mixture of the blueprint's infoset distribution and the uniform one."""
    m = len(blueprint_reach)
    total = sum(blueprint_reach)
    out = []
    for y in blueprint_reach:
        blue = (y / total) if total > 0 else 1.0 / m
        out.append(0.5 * (blue + 1.0 / m))
    return out


def blend_root_strategy(alpha, pi_resolve, pi_maxmargin):
    """Root distribution over opponent infosets; may sum below one under Resolve."""
    p_max = max(pi_resolve) if pi_resolve else 0.0
    return [p_max * a * r + (1.0 - p_max) * mm
            for a, r, mm in zip(alpha, pi_resolve, pi_maxmargin)], p_max


class EntryMinimizer:
    """Regret matcher over [0, 1]: the probability of entering a root infoset."""

    __slots__ = ("matcher",)

    def __init__(self):
        self.matcher = RegretMatcher(2)  # actions: (enter, exit)

    def update(self, enter_advantage: float) -> None:
        self.matcher.update((enter_advantage, 0.0))

    @property
    def p_enter(self) -> float:
        return self.matcher.strategy[0]


class SubgameGadget:
    """Root layer shared by the Resolve and Maxmargin objectives."""

    ROOT_KEY = GADGET_ROOT_KEY

    def __init__(self, j_keys: list, alpha: list, v_alt: list,
                 previous_value: float = 0.0):
        m = len(j_keys)
        if m == 0:
            raise ValueError("gadget needs at least one opponent infoset")
        assert all(a > 0 for a in alpha), "Resolve priors must be fully mixed"
        self.j_keys = list(j_keys)
        self.alpha = list(alpha)
        self.v_alt = list(v_alt)          # maximizer-perspective exit values
        self.previous_value = previous_value
        self.entry = [EntryMinimizer() for _ in range(m)]
        self.maxmargin = RegretMatcher(m)
        self.acc = [0.0] * m              # pmin root CFV accumulator (subtree part)
        self.subtree_cfv = [0.0] * m
        # descent statistics so PUCT can explore the root layer like any infoset
        self.stats = Infoset(GADGET_ROOT_KEY, PMIN, tuple(range(m)),
                             parent_seq=None, seq_depth=0)
        self.stats.last_reach = 1.0
        self.pi_min = [0.0] * m
        self.p_max = 0.0
        self._blend()

    def _blend(self) -> None:
        self.pi_min, self.p_max = blend_root_strategy(
            self.alpha, [e.p_enter for e in self.entry],
            self.maxmargin.strategy)

    def root_strategy(self) -> list:
        return self.pi_min

    def resolve_active(self) -> bool:
        return self.p_max > 0.0

    def update_root_minimizers(self) -> float:
        """Consume the pmin sweep's root CFVs; returns pmin's root value."""
        acc = self.acc
        self.subtree_cfv = list(acc)
        for j, v in enumerate(self.v_alt):
            acc[j] += v
        self.maxmargin.update(acc)
        for j, ent in enumerate(self.entry):
            ent.update(acc[j])
        self.stats.last_cfv = list(acc)
        self._blend()
        value = 0.0
        for j in range(len(acc)):
            value += self.pi_min[j] * self.subtree_cfv[j]
            exited = self.p_max * self.alpha[j] * (1.0 - self.entry[j].p_enter)
            value += exited * (-self.v_alt[j])
        for j in range(len(acc)):
            acc[j] = 0.0
        return value

    def exit_contribution(self) -> float:
        """Maximizer-perspective value carried by the exited root mass."""
        total = 0.0
        for j in range(len(self.j_keys)):
            exited = self.p_max * self.alpha[j] * (1.0 - self.entry[j].p_enter)
            total += exited * self.v_alt[j]
        return total

    def margins(self) -> list:
        """Diagnostic: current entry advantages per root infoset (pmin view)."""
        return [self.stats.last_cfv[j] for j in range(len(self.j_keys))]


# ---------------------------------------------------------------------------
# assembling a subgame tree


class _GadgetRootState(GameState):
    def __init__(self, n_actions):
        self._n = n_actions

    def player(self):
        return PMIN

    def actions(self):
        return tuple(range(self._n))

    def seq_key(self, player):
        return GADGET_ROOT_KEY

    def heuristic_value(self):
        return 0.0


class _GadgetChanceState(GameState):
    def __init__(self, probs, j_index):
        self._probs = probs
        self.j_index = j_index

    def player(self):
        return CHANCE

    def seq_key(self, player):
        return (GADGET_ROOT_KEY, "chance", self.j_index)

    def heuristic_value(self):
        return 0.0


def assemble_subgame(groups: list, v_alt: list, alpha: list,
                     previous_value: float = 0.0,
                     old_tree: Optional[Tree] = None) -> Tree:
    """Build a gadget-rooted tree from the opponent's root infosets.

    `groups` lists, per opponent infoset J, the entries
    ``(j_key, [(state_or_old_idx, weight), ...])`` where `weight` is the
    blueprint opponent-and-chance reach used for the chance distribution.  An
    integer entry grafts that node's whole subtree (with its regret state)
    from `old_tree`; a GameState entry creates a fresh unexpanded node.
    """
    tree = Tree(_GadgetRootState(len(groups)))
    root = tree.root
    root.actions = tuple(range(len(groups)))
    root.children = []
    carried_infosets: dict = {}

    for j_index, (j_key, entries) in enumerate(groups):
        weights = [max(w, 0.0) for _, w in entries]
        total = sum(weights)
        if total <= 0:
            weights = [1.0] * len(entries)
            total = float(len(entries))
        probs = tuple(w / total for w in weights)
        chance = tree._new_node(root.idx, j_index, _GadgetChanceState(probs, j_index))
        chance.chance_probs = probs
        chance.children = []
        chance.expanded = True
        chance.new = False
        root.children.append(chance.idx)
        for slot, (entry, _w) in enumerate(entries):
            if isinstance(entry, int):
                child_idx = _graft(tree, old_tree, entry, chance.idx, slot,
                                   carried_infosets)
            else:
                child = tree._new_node(chance.idx, slot, entry)
                child_idx = child.idx
            chance.children.append(child_idx)
    root.expanded = True
    root.new = False

    for (player, key), rec in carried_infosets.items():
        # regret state survives the move; positional bookkeeping is re-anchored
        anchor = tree.nodes[rec.members[0]]
        rec.parent_seq = tree._parent_seq(anchor)
        rec.seq_depth = tree._seq_depth(anchor)
        rec.acc = [0.0] * len(rec.actions)
        rec.visited = False
        rec.avg_seq = None
        tree.infosets[(player, key)] = rec

    gadget = SubgameGadget([g[0] for g in groups], alpha, v_alt, previous_value)
    tree.gadget = gadget
    return tree


def _graft(tree: Tree, old_tree: Tree, old_idx: int, parent: int, action_index: int,
           carried: dict) -> int:
    """Deep-copy a retained subtree into the new arena, keeping regret state."""
    old = old_tree.nodes[old_idx]
    node = tree._new_node(parent, action_index, old.state)
    node.value = old.value
    node.new = old.new
    if old.expanded:
        node.actions = old.actions
        node.chance_probs = old.chance_probs
        kids = []
        for idx, c in enumerate(old.children):
            kids.append(_graft(tree, old_tree, c, node.idx, idx, carried))
        node.children = kids
        node.expanded = True
        if old.player in (PMAX, PMIN):
            key = (old.player, old.state.seq_key(old.player))
            rec = carried.get(key)
            if rec is None:
                rec = old_tree.infosets.get(key)
                if rec is not None:
                    rec.members = []
                    carried[key] = rec
            if rec is not None:
                rec.members.append(node.idx)
    return node.idx
