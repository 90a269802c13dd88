from fragility.cli import main

main()
