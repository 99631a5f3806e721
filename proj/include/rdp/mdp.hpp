#pragma once
// Abstracted-perception MDP: the "actions" are perception errors drawn
// from a notional error policy, with the controller folded into the
// transition. Episodes are finite-horizon; a state's `t` counts steps
// remaining, and all cost timing is expressed through that counter.

#include <functional>
#include <vector>

#include "rdp/grid.hpp"

namespace rdp {

struct MdpState {
    int t = 0;               // steps remaining in the episode
    std::vector<double> x;   // continuous coordinates, one per grid axis
    std::vector<int> d;      // discrete coordinates
};

// One outcome of a transition. A terminal branch ends the episode
// immediately: the remaining return from the next step onward is exactly
// `value` (used for absorbing failure states).
struct TransitionBranch {
    double prob = 0.0;
    bool terminal = false;
    double value = 0.0;
    std::vector<double> x;
    std::vector<int> d;
};

struct AbstractedPerceptionMdp {
    Grid grid;     // spatial state grid; time is handled by the solver
    Grid errors;   // error atoms as a grid over continuous error axes
    int horizon = 1;
    double discount = 1.0;

    // Weights over error indices at a state; must sum to 1 per state.
    std::function<void(const MdpState&, std::vector<double>&)> error_policy;
    // Outcomes of taking error `eps_idx` at a state; probs must sum to 1.
    // Next states are taken at t - 1; off-grid coordinates are expanded by
    // the solver into multilinear interpolation weights.
    std::function<void(const MdpState&, int eps_idx, std::vector<TransitionBranch>&)> transition;
    std::function<double(const MdpState&, int eps_idx)> cost;

    std::size_t num_errors() const { return errors.num_cells(); }
    std::vector<double> error_atom(std::size_t eps_idx) const {
        std::vector<double> atom(errors.num_axes());
        int none = 0;
        errors.cell_point(eps_idx, atom, std::span<int>(&none, 0));
        return atom;
    }
};

}  // namespace rdp
