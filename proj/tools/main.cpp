#include <cstdio>

int main() {
    std::puts("conckit: placeholder");
    return 0;
}
