// Regenerates the bundled audio fixture and the synthetic activation tree.

#include <CLI11.hpp>

#include <iostream>

#include "fixtures.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate deterministic test fixtures"};
  app.require_subcommand(1);

  std::string audio_dir;
  auto* audio = app.add_subcommand("audio", "Write clean/ and noise/ WAV fixtures");
  audio->add_option("dir", audio_dir, "Output directory")->required();

  std::string act_dir;
  snrprobe::fixtures::DriftSpec spec;
  bool tnsr = false;
  auto* act = app.add_subcommand("activations", "Write the synthetic drift activation tree");
  act->add_option("dir", act_dir, "Output directory")->required();
  act->add_option("--seed", spec.seed, "Generator seed");
  act->add_option("--utterances", spec.utterances, "Utterances per cell");
  act->add_flag("--tnsr", tnsr, "Use the TNSR container instead of NPY");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*audio) snrprobe::fixtures::write_audio_fixture(audio_dir);
    if (*act) {
      if (tnsr) spec.container = snrprobe::Container::Tnsr;
      auto truth = snrprobe::fixtures::write_activation_fixture(act_dir, spec);
      std::cerr << "wrote " << truth.size() << " layers to " << act_dir << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
