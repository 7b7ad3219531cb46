#include <stdio.h>
#include "weakconc.h"

int main(void) {
    WcGraph *g = NULL;
    WcSolution *s = NULL;
    if (wc_graph_parse("a b 1\nb c 1\na c 1", &g) != WC_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", wc_last_error_message());
        return 1;
    }
    if (wc_fpp_solve(g, 0, 2, &s) != WC_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", wc_last_error_message());
        return 1;
    }
    printf("ok %f %f\n", wc_solution_expected_time(s), wc_solution_variance(s));
    wc_solution_free(s);
    wc_graph_free(g);
    if (wc_graph_path(1, &g) == WC_STATUS_OK) {
        return 1;
    }
    return 0;
}
