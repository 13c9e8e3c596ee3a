#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "rspn/common.hpp"

int main(int argc, char **argv)
{
    rspn::init_logging();
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
