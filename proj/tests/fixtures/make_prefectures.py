"""Regenerates the synthetic 47-prefecture fixture (k=2, s=4 block design).

Usage: python3 make_prefectures.py  (writes next to this script)
"""
import csv
import pathlib

import numpy as np

REGIONS = [
    ("Hokkaido", [[2.1, 0.4], [0.4, 2.6]], ["Hokkaido"]),
    ("Tohoku", [[4.7, 3.5], [3.5, 4.9]],
     ["Aomori", "Iwate", "Miyagi", "Akita", "Yamagata", "Fukushima"]),
    ("Kanto", [[1.1, 0.3], [0.3, 3.0]],
     ["Ibaraki", "Tochigi", "Gunma", "Saitama", "Chiba", "Tokyo", "Kanagawa"]),
    ("Hokuriku", [[3.2, 0.9], [0.9, 4.4]],
     ["Niigata", "Toyama", "Ishikawa", "Fukui", "Nagano"]),
    ("Tokai", [[1.8, 0.2], [0.2, 2.9]], ["Yamanashi", "Gifu", "Shizuoka", "Aichi"]),
    ("Kinki", [[1.1, -0.2], [-0.2, 3.9]],
     ["Mie", "Shiga", "Kyoto", "Osaka", "Hyogo", "Nara", "Wakayama"]),
    ("Chugoku", [[2.9, 1.1], [1.1, 3.6]],
     ["Tottori", "Shimane", "Okayama", "Hiroshima", "Yamaguchi"]),
    ("Shikoku", [[5.3, 1.6], [1.6, 6.1]], ["Tokushima", "Kagawa", "Ehime", "Kochi"]),
    ("Kyushu", [[2.4, 0.7], [0.7, 3.3]],
     ["Fukuoka", "Saga", "Nagasaki", "Kumamoto", "Oita", "Miyazaki", "Kagoshima"]),
    ("Okinawa", [[0.6, 0.1], [0.1, 0.9]], ["Okinawa"]),
]

BETA = np.array([4.0, 0.6, 6.0, 0.5])
PSI = np.array([[8.5, 3.0], [3.0, 10.2]])


def main():
    out = pathlib.Path(__file__).resolve().parent
    rng = np.random.default_rng(20160901)
    areas, covs, groups = [], [], []
    for region, d, prefs in REGIONS:
        d = np.array(d)
        for name in prefs:
            x = np.round(rng.uniform(5.0, 25.0, size=2), 2)
            X = np.array([[1.0, x[0], 0.0, 0.0], [0.0, 0.0, 1.0, x[1]]])
            v = rng.multivariate_normal(np.zeros(2), PSI)
            e = rng.multivariate_normal(np.zeros(2), d)
            y = np.round(X @ BETA + v + e, 3)
            areas.append([name, *y, *X.ravel()])
            covs.append([name, *d.ravel()])
            groups.append([name, region])
    assert len(areas) == 47

    def write(path, header, rows):
        with open(out / path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([v if isinstance(v, str) else f"{v:g}" for v in r])

    write("prefectures_areas.csv",
          ["area_id", "y_1", "y_2"] + [f"x_{j}_{c}" for j in (1, 2) for c in (1, 2, 3, 4)],
          areas)
    write("prefectures_cov.csv", ["area_id", "d_1_1", "d_1_2", "d_2_1", "d_2_2"], covs)
    write("prefectures_groups.csv", ["area_id", "group"], groups)


if __name__ == "__main__":
    main()
