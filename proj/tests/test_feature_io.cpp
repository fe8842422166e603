#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "rerank/rerank.hpp"
int main_unused(){return 0;}
