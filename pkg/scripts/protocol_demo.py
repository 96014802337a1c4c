"""Walk one authorized and one unauthorized user through the protocol.

The owner learns W on synthetic data, releases an ambiguated codebook, and
both users probe the server with a noisy copy of the same stored point.
"""
import argparse

import numpy as np

from sca.ambiguation import ambiguate_query, ambiguation_levels
from sca.codec import decode, purify
from sca.datagen import SyntheticSpec, gen_authorized_query, gen_gaussian
from sca.errors import EmptyNeighborhood
from sca.search import radius_from_quantile
from sca.threat import PipelineConfig, deploy, normalized_mse
from sca.transform import LearningConfig


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-dims", type=int, default=32)
    p.add_argument("--n-points", type=int, default=500)
    p.add_argument("--code-len", type=int, default=64)
    p.add_argument("--s-x", type=int, default=8)
    p.add_argument("--s-q", type=int, default=4)
    p.add_argument("--sigma-z", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    x = gen_gaussian(SyntheticSpec(n_dims=args.n_dims, n_points=args.n_points, rng_seed=args.seed))
    half, full = ambiguation_levels(args.code_len, args.s_x)
    cfg = PipelineConfig(code_len=args.code_len, learning=LearningConfig(rng_seed=args.seed))
    dep = deploy(x, args.s_x, half, cfg)
    print(f"owner: L={args.code_len} S_x={args.s_x} S_p={half} (full would be {full})")

    target = int(rng.integers(args.n_points))
    y = gen_authorized_query(x[:, target], args.sigma_z, rng)
    b = dep.encode(y)
    probe = ambiguate_query(b, args.s_q, dep.noise_model, rng, dep.s_p)
    radius = radius_from_quantile(dep.index, [probe], 0.01)
    try:
        res = dep.index.query(probe, rng, radius)
    except EmptyNeighborhood:
        print("server: no such point")
        return
    returned = dep.index.codes[res.chosen_id]
    print(f"server: target={target} chosen={res.chosen_id} among {res.neighborhood_size} candidates")
    x_ret = x[:, res.chosen_id]
    auth = decode(dep.decoder, purify(returned, b.indices))
    unauth = decode(dep.decoder, returned)
    print(f"authorized user:   normalized MSE {normalized_mse(x_ret, auth):.4f}")
    print(f"unauthorized user: normalized MSE {normalized_mse(x_ret, unauth):.4f}")


if __name__ == "__main__":
    main()
