#pragma once

namespace sucm {

// Full command-line surface (train/evaluate/recommend/synth/validate/gradcheck);
// exposed as a function so tests can drive it in-process.
int run_cli(int argc, const char* const* argv);

}  // namespace sucm
