// Command-line front end: analyze | pilot | rates | verify. Artifacts land
// under <outdir>/<command>/<timestamp-or-label>/ with a meta.json sidecar
// echoing the full configuration.
#pragma once

namespace fylab {

// Exit codes: 0 success, 1 check/run failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace fylab
