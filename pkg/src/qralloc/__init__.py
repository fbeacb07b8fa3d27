"""qralloc: portfolio allocation from quantile and least-squares regressions.

Weights come out of a regression of a numeraire asset's returns on the
deviations against every other asset, so the budget constraint is built
in. Fitting the regression at different quantile levels targets different
risk/reward profiles; an l1 penalty on the weights keeps large portfolios
sparse and stable. The package covers data ingestion, the estimators, the
penalty tuning rules, the rolling backtest protocol, the indicator battery
and a Monte Carlo comparison harness, plus a batch CLI.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DegenerateSeriesError,
    EngineError,
    NonConvergenceError,
    SolverError,
    UndefinedRatioError,
)
from .indicators import (
    IndicatorReport,
    alpha_risk_hat,
    compute_report,
    empirical_quantile,
    mad_hat,
    omega_hat,
    psi1_hat,
    psi2_hat,
    rachev_hat,
    sharpe_hat,
    turnover,
    wealth_path,
)
from .panel import (
    AssetStats,
    ReturnPanel,
    descriptive_stats,
    load_returns,
    prices_to_returns,
    save_returns,
    save_stats,
)
from .regression import (
    Certificate,
    DesignProblem,
    LeastSquaresRegression,
    QuantileRegression,
    RegressionFit,
    certify,
    check_loss,
    fit_ols,
    fit_ols_l1,
    fit_problem,
    fit_qr,
    fit_qr_l1,
)
from .tuning import (
    LambdaChoice,
    LambdaRule,
    LassoCalibration,
    calibrate_lasso_lambda,
    optimal_lambda,
    simulate_pivot,
)
from .allocation import (
    PortfolioAllocator,
    StrategySpec,
    WeightVector,
    deviation_design,
    estimate_weights,
    recover_weights,
    select_numeraire,
    threshold_positions,
)
from .backtest import (
    BacktestResult,
    WeightPath,
    WindowPlan,
    decomposition_stats,
    make_windows,
    run_backtest,
    split_subperiods,
    write_backtest_files,
)
from .simulation import (
    DistributionSpec,
    MonteCarloResult,
    MonteCarloSpec,
    estimate_moments,
    random_moments,
    run_monte_carlo,
    sample_panel,
)
