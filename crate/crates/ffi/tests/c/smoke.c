#include <stdio.h>
#include <string.h>

#include "qns.h"

static int fail(const char *what) {
    const char *msg = qns_last_error();
    fprintf(stderr, "%s failed: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    size_t edges[] = {0, 1, 1, 2, 2, 3, 3, 4, 4, 0};
    QnsGraph *c5 = NULL;
    if (qns_graph_new(5, edges, 5, &c5) != QNS_OK) return fail("graph");
    double theta = 0.0;
    if (qns_lovasz_theta(c5, 1e-7, &theta) != QNS_OK) return fail("theta");
    printf("theta %.6f\n", theta);
    qns_graph_free(c5);

    QnsCorrelation *k = NULL;
    if (qns_kd2_colouring(2, &k) != QNS_OK) return fail("kd2");
    QnsCheck chk;
    if (qns_correlation_verify(k, 1e-9, &chk) != QNS_OK || !chk.pass) return fail("verify");

    QnsGraph *k4 = NULL;
    if (qns_graph_from_json("{\"n\":4,\"edges\":[[0,1],[0,2],[0,3],[1,2],[1,3],[2,3]]}", &k4) != QNS_OK)
        return fail("graph json");
    QnsGame *game = NULL;
    if (qns_colouring_game(k4, 2, 0, &game) != QNS_OK) return fail("game");
    if (qns_game_check(game, k, 1e-9, &chk) != QNS_OK || !chk.pass) return fail("game check");
    printf("game pass %d\n", chk.pass);

    char *json = NULL;
    if (qns_correlation_to_json(k, &json) != QNS_OK) return fail("to_json");
    printf("json starts %.15s\n", json);
    qns_string_free(json);

    QnsCorrelation *bad = NULL;
    int code = qns_correlation_from_json("{\"kind\":\"ns\"}", &bad);
    printf("bad code %d\n", code);

    qns_game_free(game);
    qns_graph_free(k4);
    qns_correlation_free(k);
    return code == QNS_ERR_INVALID_INPUT ? 0 : 1;
}
