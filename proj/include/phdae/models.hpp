#pragma once

#include "phdae/core.hpp"
#include "phdae/rng.hpp"

#include <cstdint>

namespace phdae::models {

/// Grounded directed-graph description of an RLC circuit: incidence
/// columns partitioned by element class, positive definite diagonal
/// element matrices.
struct CircuitGraph {
    Mat Ar, Ac, Al, Av, Ai;  ///< node x branch incidence blocks (ground row removed)
    Mat res, cap, ind;       ///< PD diagonal R, C, L element matrices
};

/// MNA-style pHDAE with state (node voltages, inductor currents,
/// voltage-source currents) and ports (current sources, voltage sources).
LtiPhDae rlc_model(const CircuitGraph& graph);

/// Seed-deterministic connected random circuit, for pipeline tests and
/// the model CLI.
CircuitGraph random_rlc_graph(Index nodes, std::uint64_t seed);

struct PowerNetworkParams {
    double L = 2.0;
    double C1 = 0.01;
    double C2 = 0.02;
    double R_L = 0.1;
    double R_G = 6.0;
    double R_R = 3.0;
};

/// DC generator + transmission line + load surrogate; state
/// (I, V1, V2, I_G, I_R), input E_G, output I_G. Index-one pencil.
LtiPhDae power_network_model(const PowerNetworkParams& p = {});

/// Steady state delivering power P to the load resistor, and the
/// generator voltage that sustains it.
struct PowerEquilibrium {
    Vec z;
    double e_g = 0.0;
};
PowerEquilibrium power_network_equilibrium(const PowerNetworkParams& p, double power);

/// The initial value printed with the published simulation example
/// (sqrt(10/R_R) scaling); its fourth component is checked, not trusted.
Vec power_network_example_initial_value(const PowerNetworkParams& p = {});

struct MsdParams {
    Index g = 1000;      ///< mass count (>= 3)
    double mass = 100.0;
    double k = 2.0;      ///< chain spring
    double d = 5.0;      ///< chain damper
    double kappa = 2.0;  ///< ground spring
    double delta = 5.0;  ///< ground damper
    double kappa_1 = 4.0, kappa_g = 4.0;
    double delta_1 = 10.0, delta_g = 10.0;
};

/// Holonomically constrained mass-spring-damper chain as an index-two
/// pHDAE with state (q, v, lambda), dim 2g + 1; the rigid bar couples the
/// first and last mass and the constraint row is the velocity form C v = 0.
LtiPhDae msd_model(const MsdParams& p);

/// Underlying pHODE of the chain, dim 2(g-1): both q and v restricted to
/// the constraint surface ker C. Input-output map equals the full model.
LtiPhDae msd_uode(const MsdParams& p);

/// Synthetic block-structured flow-network analogue: E = diag(M1, M2, 0),
/// J with coupling blocks J12, J32 (J32 full row rank), R = diag(0, R22, 0).
/// Index two with n1 = n4 = rank(J32) in the staircase form.
LtiPhDae gas_like_model(Index n1, Index n2, Index n3, std::uint64_t seed);

enum class DampingProfile { full, rank_deficient, tridiagonal };

/// Shifted implicit-step matrix A = E + tau (R - J) with certified PSD
/// symmetric part, for solver benchmarks.
struct HsBench {
    Mat A, H, S;  ///< A = H + S, H = E + tau R, S = -tau J
    Mat E, R, J;
};

HsBench hs_bench(Index n, double tau, DampingProfile profile, std::uint64_t seed);

}  // namespace phdae::models
