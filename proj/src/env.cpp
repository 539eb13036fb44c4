#include "predplan/env.hpp"

namespace predplan {

NodeId clamp_pm_node(Tape& tape, NodeId x, double m) {
    const NodeId bound = tape.constant(m);
    const NodeId upper = tape.sub(x, tape.pospart(tape.sub(x, bound)));
    const NodeId neg = tape.scale(-1.0, x);
    return tape.add(upper, tape.pospart(tape.sub(neg, bound)));
}

double Env::reward(std::span<const double>, double) const {
    throw TapeError(std::string(name()) + ": no analytic reward");
}

NodeId Env::reward_node(Tape&, NodeId, NodeId) const {
    throw TapeError(std::string(name()) + ": no analytic reward");
}

}  // namespace predplan
