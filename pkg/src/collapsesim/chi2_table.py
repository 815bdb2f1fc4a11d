"""Upper-tail chi-square critical values, embedded for df <= 32.

Values are chi2.ppf(1 - alpha, df) to six decimals.
"""
from __future__ import annotations

CHI2_CRITICAL: dict[float, tuple[float, ...]] = {
    0.1: (
        2.705543, 4.605170, 6.251389, 7.779440,
        9.236357, 10.644641, 12.017037, 13.361566,
        14.683657, 15.987179, 17.275009, 18.549348,
        19.811929, 21.064144, 22.307130, 23.541829,
        24.769035, 25.989423, 27.203571, 28.411981,
        29.615089, 30.813282, 32.006900, 33.196244,
        34.381587, 35.563171, 36.741217, 37.915923,
        39.087470, 40.256024, 41.421736, 42.584745,
    ),
    0.05: (
        3.841459, 5.991465, 7.814728, 9.487729,
        11.070498, 12.591587, 14.067140, 15.507313,
        16.918978, 18.307038, 19.675138, 21.026070,
        22.362032, 23.684791, 24.995790, 26.296228,
        27.587112, 28.869299, 30.143527, 31.410433,
        32.670573, 33.924438, 35.172462, 36.415029,
        37.652484, 38.885139, 40.113272, 41.337138,
        42.556968, 43.772972, 44.985343, 46.194260,
    ),
    0.025: (
        5.023886, 7.377759, 9.348404, 11.143287,
        12.832502, 14.449375, 16.012764, 17.534546,
        19.022768, 20.483177, 21.920049, 23.336664,
        24.735605, 26.118948, 27.488393, 28.845351,
        30.191009, 31.526378, 32.852327, 34.169607,
        35.478876, 36.780712, 38.075627, 39.364077,
        40.646469, 41.923170, 43.194511, 44.460792,
        45.722286, 46.979242, 48.231890, 49.480438,
    ),
    0.01: (
        6.634897, 9.210340, 11.344867, 13.276704,
        15.086272, 16.811894, 18.475307, 20.090235,
        21.665994, 23.209251, 24.724970, 26.216967,
        27.688250, 29.141238, 30.577914, 31.999927,
        33.408664, 34.805306, 36.190869, 37.566235,
        38.932173, 40.289360, 41.638398, 42.979820,
        44.314105, 45.641683, 46.962942, 48.278236,
        49.587884, 50.892181, 52.191395, 53.485772,
    ),
    0.005: (
        7.879439, 10.596635, 12.838156, 14.860259,
        16.749602, 18.547584, 20.277740, 21.954955,
        23.589351, 25.188180, 26.756849, 28.299519,
        29.819471, 31.319350, 32.801321, 34.267187,
        35.718466, 37.156451, 38.582257, 39.996846,
        41.401065, 42.795655, 44.181275, 45.558512,
        46.927890, 48.289882, 49.644915, 50.993376,
        52.335618, 53.671962, 55.002704, 56.328115,
    ),
    0.001: (
        10.827566, 13.815511, 16.266236, 18.466827,
        20.515006, 22.457744, 24.321886, 26.124482,
        27.877165, 29.588298, 31.264134, 32.909490,
        34.528179, 36.123274, 37.697298, 39.252355,
        40.790217, 42.312396, 43.820196, 45.314747,
        46.797038, 48.267942, 49.728232, 51.178598,
        52.619656, 54.051962, 55.476020, 56.892285,
        58.301173, 59.703064, 61.098306, 62.487219,
    ),
}

MAX_DF = 32


def critical_value(df: int, alpha: float) -> float:
    """Embedded quantile lookup; raises for unsupported (df, alpha)."""
    if not (1 <= df <= MAX_DF):
        raise ValueError(f"df must be in 1..{MAX_DF}, got {df}")
    try:
        return CHI2_CRITICAL[alpha][df - 1]
    except KeyError:
        raise ValueError(
            f"alpha {alpha} not tabulated; choose one of {sorted(CHI2_CRITICAL)}") from None
