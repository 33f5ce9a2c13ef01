"""Regenerate crates/core/data/gas_attenuation_v1.csv.

Specific attenuation of moist air (oxygen + water vapour) from the
line-by-line model of Recommendation ITU-R P.676-12 Annex 1, as implemented
by ITU-Rpy (`pip install itur==0.4.0`).
"""
import sys

import numpy as np
import itur.models.itu676 as p676

FREQS_GHZ = np.arange(100.0, 200.0 + 1e-9, 2.0)
TEMPS_C = [-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0]
RHOS = [0.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0]
PRESSURES_HPA = [950.0, 1000.0, 1050.0]


def main(out):
    assert p676.get_version() == 12
    out.write("# gas specific attenuation table, schema v1\n")
    out.write("# source: ITU-R P.676-12 Annex 1 line-by-line (ITU-Rpy 0.4.0)\n")
    out.write("frequency_ghz,temperature_c,water_vapor_gm3,pressure_hpa,gamma_db_per_km\n")
    for f in FREQS_GHZ:
        for t in TEMPS_C:
            for rho in RHOS:
                for p in PRESSURES_HPA:
                    g = float(p676.gamma_exact(f, p, rho, t + 273.15).value)
                    out.write(f"{f:g},{t:g},{rho:g},{p:g},{g:.6g}\n")


if __name__ == "__main__":
    with open(sys.argv[1], "w") as fh:
        main(fh)
