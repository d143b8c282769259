#include <csignal>
#include <iostream>

#include "vrpanel/cli.hpp"

namespace {

void on_sigint(int) { vrpanel::interrupt_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_sigint);
    std::signal(SIGTERM, on_sigint);
    std::signal(SIGPIPE, SIG_IGN);
    return vrpanel::vrpanel_main(argc, argv, std::cout, std::cerr);
}
