from layerkit.pipelines.convergence_study import (
    InterpConvergenceStudy,
    SolveConvergenceStudy,
    interp_convergence_study,
    solve_convergence_study,
)
