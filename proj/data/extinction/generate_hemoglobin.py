#!/usr/bin/env python3
"""Regenerate hemoglobin.csv and its manifest from the anchor table below.

Anchors are molar extinction coefficients per tetramer in L/(mmol*cm) at
selected wavelengths. Hb and O2-Hb anchors follow S. Prahl's compilation of
Gratzer and Kollias data (omlc.org/spectra/hemoglobin, cm^-1/M divided by
1000). CO-Hb anchors follow the band positions and heights of Zijlstra,
Buursma and Meeuwsen-van der Roest (2000), converted from per-heme to
per-tetramer units (x4) and rescaled by 0.93 so that the shared O2-Hb bands
agree with the Prahl scale. Between anchors the curves are interpolated with
a monotone cubic (PCHIP) in log(epsilon), then sampled at 2 nm.
"""
import hashlib
import pathlib

import numpy as np
from scipy.interpolate import PchipInterpolator

HB = {
    380: 112.7, 390: 160.0, 400: 223.3, 410: 304.0, 420: 407.6, 430: 528.6,
    440: 413.3, 450: 103.3, 460: 23.39, 470: 16.16, 480: 14.55, 490: 16.68,
    500: 20.04, 510: 25.77, 520: 31.59, 530: 39.04, 540: 46.59, 550: 53.41,
    556: 54.54, 560: 53.79, 570: 45.07, 580: 37.02, 590: 28.32, 600: 14.68,
    620: 6.509, 650: 3.750, 680: 2.408, 700: 1.794, 730: 1.102, 750: 1.405,
    760: 1.548, 770: 1.325, 780: 1.075,
}
O2HB = {
    380: 123.0, 390: 180.0, 400: 266.2, 410: 466.8, 414: 524.3, 420: 480.4,
    430: 246.1, 440: 102.6, 450: 62.82, 460: 44.48, 470: 33.21, 480: 26.63,
    490: 23.68, 500: 20.93, 510: 20.04, 520: 24.20, 530: 39.96, 540: 53.24,
    542: 53.29, 550: 43.02, 560: 32.61, 570: 44.50, 576: 55.54, 580: 50.10,
    590: 14.40, 600: 3.200, 620: 0.942, 650: 0.368, 680: 0.278, 700: 0.290,
    730: 0.390, 750: 0.518, 760: 0.586, 780: 0.710,
}
COHB = {
    380: 118.0, 390: 170.0, 400: 262.0, 410: 520.0, 419: 714.0, 425: 640.0,
    430: 420.0, 440: 150.0, 450: 62.0, 460: 38.0, 470: 28.0, 480: 22.5,
    490: 19.5, 500: 18.6, 510: 24.0, 520: 36.0, 530: 48.0, 538: 53.3,
    545: 49.5, 555: 41.0, 562: 47.0, 569: 53.0, 575: 47.5, 580: 36.0,
    590: 13.5, 600: 4.20, 620: 1.50, 650: 0.80, 680: 0.45, 700: 0.32,
    730: 0.30, 750: 0.34, 780: 0.38,
}


def curve(anchors, grid):
    wl = np.array(sorted(anchors), dtype=float)
    eps = np.array([anchors[k] for k in sorted(anchors)], dtype=float)
    return np.exp(PchipInterpolator(wl, np.log(eps))(grid))


def main():
    here = pathlib.Path(__file__).resolve().parent
    grid = np.arange(380, 782, 2, dtype=float)
    cols = [curve(HB, grid), curve(O2HB, grid), curve(COHB, grid)]
    lines = [
        "# Molar extinction of human hemoglobin species, L/(mmol*cm), per tetramer.",
        "# Hb, O2Hb: S. Prahl, Tabulated molar extinction coefficient for hemoglobin",
        "#   in water (Gratzer and Kollias data), cm^-1/M divided by 1000.",
        "# COHb: band positions and heights from Zijlstra et al. (2000), per heme x4,",
        "#   scaled by 0.93 to the Prahl O2Hb scale.",
        "# Anchor values are interpolated by PCHIP in log space onto a 2 nm grid;",
        "#   see generate_hemoglobin.py. Values between anchors are approximate.",
        "wavelength_nm,hb,o2hb,cohb",
    ]
    for i, wl in enumerate(grid):
        lines.append(f"{wl:g},{cols[0][i]:.6g},{cols[1][i]:.6g},{cols[2][i]:.6g}")
    text = "\n".join(lines) + "\n"
    (here / "hemoglobin.csv").write_text(text, encoding="utf-8")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    (here / "hemoglobin.manifest").write_text(f"sha256 {digest} hemoglobin.csv\n", encoding="utf-8")


if __name__ == "__main__":
    main()
