#include "photonlock/plant.hpp"

#include "photonlock/error.hpp"

namespace photonlock {

Plant::Plant(PlantConfig config)
    : config_(std::move(config)),
      noise_(config_.noise, config_.window_length),
      rng_(config_.counting_seed) {
  config_.laser.validate();
  if (config_.laser.kind != SourceKind::attenuated_laser) {
    throw InvalidArgument("plant laser source must be an attenuated laser");
  }
  if (config_.herald) {
    config_.herald->validate();
    if (config_.herald->kind != SourceKind::heralded_pair) {
      throw InvalidArgument("plant herald source must be a heralded pair source");
    }
  }
  if (const auto* dev = std::get_if<FourPortDevice>(&config_.device)) dev->validate();
}

CountWindow Plant::acquire(double modulator_phase, SourceKind source) {
  last_phase_ = wrap_phase(config_.initial_phase + noise_.next() + modulator_phase);
  ++windows_;
  const PortProbabilities probs = probabilities(config_.device, last_phase_);
  if (source == SourceKind::attenuated_laser) {
    return sample_window_laser(config_.laser, probs, rng_, config_.window_length);
  }
  if (!config_.herald) throw InvalidArgument("plant has no heralded source");
  return sample_window_heralded(*config_.herald, probs, rng_, config_.window_length);
}

}  // namespace photonlock
