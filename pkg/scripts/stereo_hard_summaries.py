"""How often the EL problem is infeasible for stereology prior draws.

Compares the default summaries with the minimum/maximum/median set; the
latter leaves the observed summaries outside the hull of the simulated ones
for most parameter values, so the EL posterior is zero there.
"""

import argparse

from elabc.models import STEREO_HARD_SUMMARIES, STEREO_SUMMARIES, get_model, load_stereo_observed
from elabc.pseudolik import el_from_summaries
from elabc.rng import substream

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=500)
    parser.add_argument("--m", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    x_obs = load_stereo_observed()
    for label, spec in (("default", STEREO_SUMMARIES), ("min/max/median", STEREO_HARD_SUMMARIES)):
        model = get_model("stereo").with_summaries(spec)
        s_obs = model.summarize(x_obs)
        rng = substream(args.seed, 4)
        zero = 0
        for j in range(args.draws):
            theta = model.sample_prior(rng)
            S = model.summarize_many(model.simulate_many(theta, None, args.m, substream(args.seed, 5, j)))
            zero += el_from_summaries(S, s_obs).is_zero
        at_truth = sum(
            el_from_summaries(
                model.summarize_many(model.simulate_many(model.true_theta, None, args.m, substream(args.seed, 6, j))),
                s_obs,
            ).is_zero
            for j in range(args.draws)
        )
        print(f"{label:>15}: EL infeasible for {zero / args.draws:.0%} of prior draws, "
              f"{at_truth / args.draws:.0%} of replicates at the generating parameter")
