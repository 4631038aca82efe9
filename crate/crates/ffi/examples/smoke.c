#include <stdio.h>
#include <stdlib.h>

#include "lumpmg.h"

int main(void) {
    LumpmgProblem *p = NULL;
    if (lumpmg_problem_new(1, LUMPMG_BC_ALL_DIRICHLET, 4, 1e-2, &p) != LUMPMG_OK) {
        fprintf(stderr, "problem: %s\n", lumpmg_last_error_message());
        return 1;
    }
    size_t n = 0;
    lumpmg_problem_dofs(p, &n);
    double *b = malloc(2 * n * sizeof(double));
    double *x = malloc(2 * n * sizeof(double));
    lumpmg_problem_rhs(p, b, 2 * n);

    LumpmgSolver *s = NULL;
    if (lumpmg_solver_new(p, "{\"solver\": \"gmres\", \"precond\": \"B\"}", &s) != LUMPMG_OK) {
        fprintf(stderr, "solver: %s\n", lumpmg_last_error_message());
        return 1;
    }
    LumpmgSolveInfo info;
    LumpmgStatus st = lumpmg_solver_solve(s, b, x, 2 * n, 1e-8, 200, 0, &info);
    printf("lumpmg %s: n=%zu iterations=%zu converged=%d\n", lumpmg_version(), n, info.iterations, info.converged);

    if (lumpmg_problem_new(1, LUMPMG_BC_ALL_DIRICHLET, 4, 0.0, &p) == LUMPMG_OK) return 1;
    printf("rejected tau=0: %s\n", lumpmg_last_error_message());

    lumpmg_solver_free(s);
    lumpmg_problem_free(p);
    free(b);
    free(x);
    return st == LUMPMG_OK && info.converged ? 0 : 1;
}
