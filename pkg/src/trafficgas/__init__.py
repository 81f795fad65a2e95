"""Thermal-gas model of traffic flow and its number-variance statistics.

A lane of traffic is modeled as a one-dimensional gas of particles whose
unit-mean spacing r follows p(r) proportional to exp(-beta/r) exp(-B r),
with a single inverse-temperature parameter beta. The package evaluates
the model exactly (Bessel-form normalizations, moments, n-th neighbor
densities), measures spectral rigidity through the number variance
Delta_N(L) and its asymptotic slope chi(beta) and shift gamma(beta),
samples the gas reproducibly, and fits beta to measured or synthetic
single-vehicle detector data as a function of traffic density.

Numerical hot loops run through a compiled extension when it is available
and through equivalent NumPy code otherwise; `trafficgas.BACKEND` names
the active implementation.
"""

__version__ = "0.1.0"

from . import cli, gas, kernels, rigidity, specfun, trafficdata
from .gas import (
    GasParameters,
    NthSpacingDensity,
    SpacingSequence,
    clearance_pdf,
    convolution_oracle,
    make_gas,
    moment,
    nth_density,
    nth_pdf,
    sample_spacings,
    sampler_efficiency,
)
from .kernels import BACKEND
from .rigidity import (
    AsymptoticCoefficients,
    ClusterTruncationError,
    VarianceCurve,
    asymptotic_coefficients,
    chi_coefficient,
    cluster_function,
    empirical_number_variance,
    fit_linear_tail,
    fit_power_law,
    gamma_coefficient,
    invert_chi,
    number_variance_asymptotic,
    number_variance_integral,
    renewal_slope_oracle,
    timegap_variance,
)
from .specfun import (
    QuadratureError,
    ScaledBessel,
    bessel_k,
    integrate_finite,
    integrate_semiinfinite,
)
from .trafficdata import (
    AggregationWindow,
    ColumnFormat,
    DensityBin,
    FundamentalDiagram,
    GapTable,
    RecordColumns,
    VehicleRecord,
    aggregate,
    analyze_bin,
    bin_by_density,
    extract_gaps,
    fundamental_diagram,
    load_records,
    synth_generate,
    write_records,
)

__all__ = [
    "__version__",
    "BACKEND",
    "AggregationWindow",
    "AsymptoticCoefficients",
    "ClusterTruncationError",
    "ColumnFormat",
    "DensityBin",
    "FundamentalDiagram",
    "GapTable",
    "GasParameters",
    "NthSpacingDensity",
    "QuadratureError",
    "RecordColumns",
    "ScaledBessel",
    "SpacingSequence",
    "VarianceCurve",
    "VehicleRecord",
    "aggregate",
    "analyze_bin",
    "asymptotic_coefficients",
    "bessel_k",
    "bin_by_density",
    "chi_coefficient",
    "clearance_pdf",
    "cli",
    "cluster_function",
    "convolution_oracle",
    "empirical_number_variance",
    "extract_gaps",
    "fit_linear_tail",
    "fit_power_law",
    "fundamental_diagram",
    "gamma_coefficient",
    "gas",
    "integrate_finite",
    "integrate_semiinfinite",
    "invert_chi",
    "kernels",
    "load_records",
    "make_gas",
    "moment",
    "nth_density",
    "nth_pdf",
    "number_variance_asymptotic",
    "number_variance_integral",
    "renewal_slope_oracle",
    "rigidity",
    "sample_spacings",
    "sampler_efficiency",
    "specfun",
    "synth_generate",
    "timegap_variance",
    "trafficdata",
    "write_records",
]
