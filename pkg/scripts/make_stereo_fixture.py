"""Regenerate the bundled stereology fixture (synthetic, not real inclusion data).

The 112 values are drawn from the simplified slicing model at
(lambda, sigma, xi) = (112, 6, 0.1), where the median planar diameter is
close to 6 as in the real data set.
"""

from pathlib import Path

from elabc.models import STEREO_OBSERVED_COUNT, get_model, save_observed_csv, simulate_stereo
from elabc.rng import substream

SEED = 20190314

if __name__ == "__main__":
    model = get_model("stereo")
    data = simulate_stereo(model.true_theta, substream(SEED), n=STEREO_OBSERVED_COUNT)
    out = Path(__file__).resolve().parents[1] / "src" / "elabc" / "data" / "stereo_observed.csv"
    header = (
        "SYNTHETIC stand-in for the observed inclusion diameters: 112 draws from the simplified\n"
        f"slicing model at theta={tuple(float(v) for v in model.true_theta)}, seed={SEED}; one value per line"
    )
    save_observed_csv(out, data, header=header)
    print(f"wrote {out}")
