#!/usr/bin/env python3
"""Generate data/swissmetro_synth.dat, a stand-in for the Swissmetro survey.

The real survey file (swissmetro.dat, Bierlaire et al. 2001) is not
redistributable with this repository; fetch it with tools/fetch_swissmetro.py
if you want to run the real-data experiments. This script produces a
synthetic table with the same columns, coding, availability structure and
rough value ranges, so the full pipeline (filtering, search-space expansion,
semi-artificial resampling, recovery experiments) runs out of the box:

  * 1192 individuals x 9 stated-preference menus = 10728 rows
  * 4 individuals carry AGE=6 (age not known); the shipped filter config
    drops them, leaving 10692 rows from 1188 individuals
  * train/SM always available, car only for car owners
  * integer attribute levels correlated the way trip data is (cost and the
    travel times all scale with an underlying trip length)

Usage: python3 tools/make_surrogate_data.py [output_path]
"""

import sys

import numpy as np

HEADER = [
    "GROUP", "SURVEY", "SP", "ID", "PURPOSE", "FIRST", "TICKET", "WHO",
    "LUGGAGE", "AGE", "MALE", "INCOME", "GA", "ORIGIN", "DEST",
    "TRAIN_AV", "CAR_AV", "SM_AV",
    "TRAIN_TT", "TRAIN_CO", "TRAIN_HE",
    "SM_TT", "SM_CO", "SM_HE", "SM_SEATS",
    "CAR_TT", "CAR_CO", "CHOICE",
]

N_INDIVIDUALS = 1192
MENUS = 9
N_UNKNOWN_AGE = 4


def main(path):
    rng = np.random.default_rng(20240817)

    rows = []
    for ind in range(1, N_INDIVIDUALS + 1):
        purpose = rng.choice(
            range(1, 10), p=[0.28, 0.09, 0.25, 0.12, 0.06, 0.03, 0.05, 0.04, 0.08])
        age = rng.choice(range(1, 6), p=[0.10, 0.30, 0.30, 0.20, 0.10])
        if ind > N_INDIVIDUALS - N_UNKNOWN_AGE:
            age = 6  # "not known": the default filter config drops these
        ga = int(rng.random() < 0.14)
        income = rng.choice(range(0, 5), p=[0.04, 0.18, 0.35, 0.30, 0.13])
        luggage = rng.choice([0, 1, 3], p=[0.60, 0.35, 0.05])
        who = rng.choice(range(0, 4), p=[0.05, 0.50, 0.30, 0.15])
        male = int(rng.random() < 0.75)
        first = int(rng.random() < 0.4)
        ticket = rng.integers(1, 11)
        origin, dest = rng.integers(1, 26, size=2)
        group = rng.choice([2, 3])
        survey = int(group == 3)
        car_av = int(rng.random() < 0.78)

        # trip length spans a wide log-normal range (25..600 min) so linear
        # and log representations of the times are statistically separable
        base_tt = float(np.clip(np.exp(rng.normal(4.6, 0.80)), 25.0, 600.0))

        for _ in range(MENUS):
            # price levels are drawn independently of the times (orthogonal
            # stated-preference design); annual season tickets make train
            # nearly free and halve the Swissmetro fare
            train_tt = int(round(base_tt * rng.uniform(0.9, 1.6)))
            train_he = int(rng.choice([30, 60, 120]))
            train_co = int(round(0.50 * base_tt ** 0.80 * rng.uniform(0.4, 2.0) + 4))
            sm_co = int(round(0.70 * base_tt ** 0.80 * rng.uniform(0.4, 2.2) + 5))
            if ga:
                train_co = int(rng.integers(1, 21))
                sm_co = max(1, sm_co // 2)
            sm_tt = int(round(base_tt * rng.uniform(0.30, 0.70)))
            sm_he = int(rng.choice([10, 20, 30]))
            sm_seats = int(rng.random() < 0.12)
            car_tt = int(round(base_tt * rng.uniform(0.8, 1.2)))
            car_co = int(round(0.50 * base_tt ** 0.85 * rng.uniform(0.5, 1.8) + 6))

            # heterogeneous sensitivities mirror the behavioral structure of
            # the survey population: time sensitivity rises with age, season
            # tickets and employer-paid trips damp cost sensitivity, luggage
            # pushes travelers toward the car
            b_tt = -0.010 * (1.0 + 0.18 * (age - 3) if age <= 5 else 1.0)
            b_co = -0.011 * (1.25 - 0.10 * income) * (0.55 if who == 2 else 1.0)
            v_train = (1.0 + b_tt * train_tt + b_co * (1.0 - 0.6 * ga) * train_co
                       - 0.008 * train_he + 0.3 * ga + 0.35 * (age >= 4))
            v_sm = (0.9 + 0.9 * b_tt * sm_tt + b_co * (1.0 - 0.6 * ga) * sm_co
                    - 0.020 * sm_he + 0.2 * ga + 0.25 * (age == 1))
            v_car = (b_tt * car_tt + b_co * (1.0 + 0.3 * (luggage > 0)) * car_co
                     + 0.4 * (luggage > 0) + 0.3 * (who == 1))
            utilities = np.array([v_train, v_sm, v_car])
            avail = np.array([1, 1, car_av], dtype=bool)
            expu = np.where(avail, np.exp(utilities - utilities[avail].max()), 0.0)
            p = expu / expu.sum()
            choice = int(rng.choice([1, 2, 3], p=p))

            rows.append([
                group, survey, 1, ind, purpose, first, ticket, who,
                luggage, age, male, income, ga, origin, dest,
                1, car_av, 1,
                train_tt, train_co, train_he,
                sm_tt, sm_co, sm_he, sm_seats,
                car_tt, car_co, choice,
            ])

    with open(path, "w") as out:
        out.write("\t".join(HEADER) + "\n")
        for row in rows:
            out.write("\t".join(str(int(v)) for v in row) + "\n")
    print(f"wrote {len(rows)} rows to {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/swissmetro_synth.dat")
