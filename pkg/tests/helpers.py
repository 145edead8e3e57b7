import numpy as np

from mcgraph.grid_fields import VectorField


def helical_field(g, seed, modes=6, width=2.0):
    """Windowed superposition of circularly polarised plane waves of one
    handedness; ``v . curl v`` is sign-definite for such fields."""
    rng = np.random.default_rng(seed)
    x = g.coords
    comps = np.zeros((3,) + g.shape)
    for _ in range(modes):
        k = rng.normal(size=3)
        k /= np.linalg.norm(k)
        e1 = np.cross(k, rng.normal(size=3))
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(k, e1)
        phase = np.einsum("i,i...->...", k, x) + rng.uniform(0, 2 * np.pi)
        a = rng.uniform(0.5, 1.5)
        comps += a * (e1.reshape(3, 1, 1, 1) * np.cos(phase) + e2.reshape(3, 1, 1, 1) * np.sin(phase))
    env = np.exp(-np.sum(x**2, axis=0) / (2 * width**2))
    return VectorField(g, comps * env)
