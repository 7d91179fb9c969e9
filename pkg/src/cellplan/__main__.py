from cellplan.cli import main

main()
