import random

from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_tree_parents(rng: random.Random, n: int, d: int = 2):
    parent = {v: rng.randint(1, v - 1) for v in range(2, n + 1)}
    deco = {v: rng.randint(1, d) for v in range(1, n + 1)}
    return parent, deco
